"""Synthetic designs, Monte Carlo replications and timing benchmarks.

Covariates: ``x0 ~ N(0, 1)``, ``x1 ~ Bernoulli(1/2)``, ``x2 ~ Poisson(2)`` and
``x_j ~ (chi2(1) - 1) / sqrt(2)`` for ``j >= 3``. The latent shock ``u`` is
drawn independently from one of four families and ``y = 1(x0 + x @ beta - u > 0)``,
so the link is the CDF of ``u``.

Randomness comes from Philox streams seeded through ``SeedSequence``;
replication ``r`` of base seed ``s`` uses ``SeedSequence(s, spawn_key=(r,))``,
so adding replications never changes earlier ones.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .engines import (
    GDConfig,
    bgd_step_known_g,
    init_state,
    kbgd_step,
    kmbgd_step,
    run_akmbgd,
)
from .errors import MindexError, NumericalError, UsageError
from .inference import InferenceConfig, covariance
from .logit import logit_init
from .model import Dataset, as_coefficients

__all__ = [
    "ERROR_FAMILIES",
    "BASE_BETA",
    "DGPSpec",
    "default_beta_star",
    "replication_seed",
    "generate_dataset",
    "ReplicationResult",
    "akmbgd_estimator",
    "MCReport",
    "run_monte_carlo",
    "BenchTrace",
    "run_bench",
    "write_traces_csv",
]

BASE_BETA = (1.0, 1.0, 0.5, 2.0, 5.0, -0.5, -1.0, -2.0, -5.0)

# family -> frozen scipy distribution of u (its CDF is the link)
ERROR_FAMILIES = {
    "cauchy": stats.cauchy(),
    "chisq3": stats.chi2(3),
    "normal": stats.norm(),
    "logistic": stats.logistic(),
}


def default_beta_star(p: int) -> np.ndarray:
    """Nine nonzero free coefficients followed by zeros, cut to length ``p``."""
    b = np.zeros(p)
    k = min(p, len(BASE_BETA))
    b[:k] = BASE_BETA[:k]
    return b


@dataclass(frozen=True)
class DGPSpec:
    """Simulation design.

    ``beta_star`` defaults to :func:`default_beta_star`.
    """

    n: int
    p: int
    error_family: str = "normal"
    beta_star: tuple[float, ...] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n < 2 or self.p < 1:
            raise UsageError("need n >= 2 and p >= 1")
        if self.error_family not in ERROR_FAMILIES:
            raise UsageError(
                f"unknown error family {self.error_family!r}; choose from {sorted(ERROR_FAMILIES)}"
            )
        if self.beta_star is None:
            object.__setattr__(self, "beta_star", tuple(default_beta_star(self.p)))
        else:
            b = as_coefficients(self.beta_star, self.p)
            object.__setattr__(self, "beta_star", tuple(float(v) for v in b))

    @property
    def beta(self) -> np.ndarray:
        return np.array(self.beta_star)

    @property
    def link(self):
        """Frozen distribution of ``u``; ``.cdf`` is ``G`` and ``.pdf`` is ``G'``."""
        return ERROR_FAMILIES[self.error_family]

    def replicate(self, r: int) -> "DGPSpec":
        return DGPSpec(self.n, self.p, self.error_family, self.beta_star, replication_seed(self.seed, r))


def replication_seed(base: int, r: int) -> int:
    """64-bit seed of replication ``r``, independent of how many replications run."""
    ss = np.random.SeedSequence(int(base), spawn_key=(int(r),))
    return int(ss.generate_state(1, np.uint64)[0])


def _errors(rng: np.random.Generator, family: str, n: int) -> np.ndarray:
    if family == "cauchy":
        return rng.standard_cauchy(n)
    if family == "chisq3":
        return rng.chisquare(3, n)
    if family == "normal":
        return rng.standard_normal(n)
    return rng.logistic(0.0, 1.0, n)


def generate_dataset(spec: DGPSpec) -> tuple[Dataset, np.ndarray]:
    """Draw one sample; returns the dataset and the true index values."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(spec.seed))))
    n = spec.n
    x0 = rng.standard_normal(n)
    x = np.empty((n, spec.p))
    for j in range(spec.p):
        if j == 0:
            x[:, j] = rng.binomial(1, 0.5, n)
        elif j == 1:
            x[:, j] = rng.poisson(2.0, n)
        else:
            x[:, j] = (rng.chisquare(1, n) - 1.0) / np.sqrt(2.0)
    u = _errors(rng, spec.error_family, n)
    z = x0 + x @ spec.beta
    y = (z - u > 0).astype(np.float64)
    names = tuple(f"x{j + 1}" for j in range(spec.p))
    return Dataset(x0, x, y, names), z


@dataclass
class ReplicationResult:
    """What an estimator hands back for one replication."""

    beta_hat: np.ndarray
    se: np.ndarray
    extras: dict = field(default_factory=dict)


def akmbgd_estimator(dataset: Dataset, gd: GDConfig) -> ReplicationResult:
    """Logit start, averaged mini-batch descent, plug-in standard errors."""
    beta0 = logit_init(dataset)
    est = run_akmbgd(dataset, gd, beta0=beta0)
    cov = covariance(dataset, est.beta_bar, InferenceConfig.from_gd(gd))
    return ReplicationResult(
        est.beta_bar,
        cov.se,
        {
            "beta_last": est.beta_last.tolist(),
            "identity_error": cov.identity_error(),
            "seconds": est.seconds,
        },
    )


def _one_replication(args):
    dgp, gd, r, estimator = args
    rep = dgp.replicate(r)
    t0 = time.perf_counter()
    try:
        data, _ = generate_dataset(rep)
        res = estimator(data, gd.replace(seed=replication_seed(gd.seed, r)))
        out = {
            "r": r,
            "ok": True,
            "beta_hat": [float(v) for v in res.beta_hat],
            "se": [float(v) for v in res.se],
            "extras": res.extras,
        }
    except MindexError as exc:
        out = {"r": r, "ok": False, "error": f"{type(exc).__name__}: {exc}"}
    out["seconds"] = time.perf_counter() - t0
    return out


@dataclass
class MCReport:
    """Aggregated Monte Carlo results.

    ``bias`` is ``|mean_r beta_hat - beta*|`` and ``rmse`` the root mean
    squared deviation from ``beta*``. ``coverage[j]`` is the share of
    replications with ``|beta_hat - beta*| <= 1.96 se``; it is ``None`` when
    some replication reported ``se = 0`` for that coefficient.
    """

    beta_star: np.ndarray
    estimates: np.ndarray
    se: np.ndarray
    bias: np.ndarray
    rmse: np.ndarray
    coverage: list
    R: int
    n_failed: int
    failures: list
    replications: list
    settings: dict
    seconds: list

    @property
    def partial(self) -> bool:
        return self.n_failed > 0

    def to_dict(self, timings: bool = False) -> dict:
        d = {
            "settings": self.settings,
            "R": self.R,
            "n_ok": self.R - self.n_failed,
            "n_failed": self.n_failed,
            "partial": self.partial,
            "failures": self.failures,
            "beta_star": self.beta_star.tolist(),
            "bias": self.bias.tolist(),
            "rmse": self.rmse.tolist(),
            "coverage": self.coverage,
            "estimates": self.estimates.tolist(),
            "se": self.se.tolist(),
        }
        if timings:
            s = np.array(self.seconds)
            d["runtime"] = {
                "total_seconds": float(s.sum()),
                "mean_seconds": float(s.mean()) if s.size else 0.0,
                "max_seconds": float(s.max()) if s.size else 0.0,
            }
        return d

    def to_json(self, timings: bool = False) -> str:
        """Deterministic JSON; wall-clock times only when ``timings`` is set."""
        return json.dumps(self.to_dict(timings), indent=2)

    def to_table(self) -> str:
        """Aligned text table: one column per coefficient, rows Bias/RMSE/CR."""
        p = self.beta_star.shape[0]
        head = ["", *[f"beta{j + 1}" for j in range(p)]]
        rows = [
            ["Bias", *[f"{v:.4f}" for v in self.bias]],
            ["RMSE", *[f"{v:.4f}" for v in self.rmse]],
            ["CR", *["n/a" if v is None else f"{v:.4f}" for v in self.coverage]],
        ]
        widths = [max(len(r[i]) for r in [head, *rows]) for i in range(p + 1)]
        fmt = lambda r: "  ".join(c.rjust(w) for c, w in zip(r, widths))  # noqa: E731
        s = self.settings
        title = f"n={s.get('n')}  p={s.get('p')}  errors={s.get('error_family')}  R={self.R}"
        return "\n".join([title, fmt(head), *map(fmt, rows)]) + "\n"


def _aggregate(beta_star, results, settings) -> MCReport:
    p = beta_star.shape[0]
    ok = [r for r in results if r["ok"]]
    est = np.array([r["beta_hat"] for r in ok]).reshape(-1, p)
    se = np.array([r["se"] for r in ok]).reshape(-1, p)
    if est.shape[0]:
        dev = est - beta_star
        bias = np.abs(est.mean(axis=0) - beta_star)
        rmse = np.sqrt(np.mean(dev**2, axis=0))
        coverage = []
        for j in range(p):
            if np.any(se[:, j] == 0):
                coverage.append(None)
            else:
                coverage.append(float(np.mean(np.abs(dev[:, j]) <= 1.96 * se[:, j])))
    else:
        bias = rmse = np.full(p, np.nan)
        coverage = [None] * p
    failures = [{"r": r["r"], "error": r["error"]} for r in results if not r["ok"]]
    reps = [{k: v for k, v in r.items() if k != "seconds"} for r in results]
    return MCReport(
        beta_star=beta_star,
        estimates=est,
        se=se,
        bias=bias,
        rmse=rmse,
        coverage=coverage,
        R=len(results),
        n_failed=len(failures),
        failures=failures,
        replications=reps,
        settings=settings,
        seconds=[r["seconds"] for r in results],
    )


def run_monte_carlo(
    dgp: DGPSpec,
    gd: GDConfig,
    R: int,
    estimator: Callable[[Dataset, GDConfig], ReplicationResult] = akmbgd_estimator,
    threads: int = 1,
    progress: Callable[[dict], None] | None = None,
) -> MCReport:
    """``R`` independent replications of generate -> estimate -> interval.

    Replication ``r`` uses ``dgp.replicate(r)`` for the data and
    ``replication_seed(gd.seed, r)`` for the subsample stream, so results do
    not depend on ``threads``. With ``threads > 1`` replications run in
    worker processes (the estimator must be picklable).
    """
    if R < 1:
        raise UsageError("need at least one replication")
    jobs = [(dgp, gd, r, estimator) for r in range(R)]
    results = []
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for out in pool.map(_one_replication, jobs):
                results.append(out)
                if progress:
                    progress(out)
    else:
        for job in jobs:
            out = _one_replication(job)
            results.append(out)
            if progress:
                progress(out)
    settings = {
        "n": dgp.n,
        "p": dgp.p,
        "error_family": dgp.error_family,
        "seed": dgp.seed,
        "gd_seed": gd.seed,
        "B": gd.B,
        "delta": gd.delta,
        "burn_in": gd.burn_in,
        "follow_T": gd.follow_T,
        "stop": None if gd.stop is None else asdict(gd.stop),
        "kernel_order": gd.kernel.order,
        "bw_exponent": gd.bw_rule.exponent,
        "trimming": asdict(gd.trimming),
        "floor": asdict(gd.floor),
        "method": gd.method,
    }
    return _aggregate(dgp.beta, results, settings)


@dataclass
class BenchTrace:
    """Per-update record of one algorithm: cumulative time and coefficient RMSE."""

    algorithm: str
    k: np.ndarray
    seconds: np.ndarray
    rmse: np.ndarray
    diverged: bool = False
    message: str | None = None

    @property
    def log_inv_rmse(self) -> np.ndarray:
        return np.log(1.0 / self.rmse)

    @property
    def step_seconds(self) -> np.ndarray:
        return np.diff(np.concatenate([[0.0], self.seconds]))


_ALGORITHMS = ("kbgd", "kmbgd", "bgd_known")


def run_bench(
    dgp: DGPSpec,
    configs: Sequence[tuple[str, GDConfig]],
    iters: int,
    beta0=None,
) -> list[BenchTrace]:
    """Run each ``(algorithm, config)`` for ``iters`` updates from a shared start.

    ``algorithm`` is ``"kbgd"``, ``"kmbgd"`` or ``"bgd_known"`` (true link).
    The trace tag appends the config's NW method for the kernel engines.
    A divergence ends that trace and is flagged; the others continue.
    """
    if iters < 0:
        raise UsageError("iters must be non-negative")
    data, _ = generate_dataset(dgp)
    truth = dgp.beta
    if beta0 is None:
        beta0 = logit_init(data)
    traces = []
    for alg, cfg in configs:
        if alg not in _ALGORITHMS:
            raise UsageError(f"unknown algorithm {alg!r}; choose from {_ALGORITHMS}")
        tag = alg if alg == "bgd_known" else f"{alg}-{cfg.method}"
        state = init_state(data, cfg, beta0)
        ks, secs, errs = [], [], []
        diverged, msg = False, None
        for _ in range(iters):
            try:
                if alg == "kbgd":
                    kbgd_step(state, data, cfg)
                elif alg == "kmbgd":
                    kmbgd_step(state, data, cfg)
                else:
                    bgd_step_known_g(state, data, dgp.link.cdf, cfg.delta)
            except NumericalError as exc:
                diverged, msg = True, str(exc)
                break
            ks.append(state.k)
            secs.append(state.cumulative_seconds)
            errs.append(float(np.sqrt(np.mean((state.beta - truth) ** 2))))
        traces.append(
            BenchTrace(tag, np.array(ks, dtype=np.int64), np.array(secs), np.array(errs), diverged, msg)
        )
    return traces


def write_traces_csv(traces: Sequence[BenchTrace], path) -> None:
    """CSV with columns algorithm, k, seconds, rmse, log_inv_rmse."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["algorithm", "k", "seconds", "rmse", "log_inv_rmse"])
        for t in traces:
            for k, s, e, l in zip(t.k, t.seconds, t.rmse, t.log_inv_rmse):
                w.writerow([t.algorithm, int(k), repr(float(s)), repr(float(e)), repr(float(l))])
