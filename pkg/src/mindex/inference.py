"""Plug-in sandwich covariance, confidence intervals and the fitted link curve.

The slope matrix is estimated in its simplified form at the solution,

    Lambda = (1/n) sum_i w_i G'(z_i) x_i (x_i - E[X | z_i])',

and the score variance as

    Sigma_xi = (1/n) sum_i G(z_i)(1 - G(z_i)) r_i r_i',  r_i = x_i^phi - E[X^phi | z_i],

with ``G``, ``G'`` and the conditional means all replaced by NW estimates on
the fitted index. ``Sigma_beta = Lambda^-1 Sigma_xi Lambda^-T`` and the
standard error of coefficient ``j`` is ``sqrt(Sigma_beta[j, j] / n)``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from scipy import stats

from .errors import InferenceError, UsageError
from .kernels import BandwidthRule, KernelSpec, bandwidth, make_kernel
from .model import Dataset, TrimmingSpec, as_coefficients, compute_index, trimming_mask
from .nw import nw_conditional_mean, nw_deriv, nw_full

__all__ = [
    "InferenceConfig",
    "CovarianceEstimate",
    "CDFCurve",
    "estimate_lambda",
    "estimate_sigma_xi",
    "covariance",
    "sandwich",
    "known_link_covariance",
    "confidence_intervals",
    "estimate_cdf_curve",
    "G_CLAMP",
    "COND_LIMIT",
]

G_CLAMP = 1e-6
COND_LIMIT = 1e12


@dataclass(frozen=True)
class InferenceConfig:
    """Smoothing choices for the variance estimate.

    ``lambda_outer="x"`` uses the untrimmed ``x_i`` in the outer factor of
    the slope matrix with the trimming mask as a scalar weight;
    ``"xphi"`` uses ``x_i^phi`` in both factors instead.
    """

    kernel: KernelSpec = field(default_factory=lambda: make_kernel(6))
    bw_rule: BandwidthRule = field(default_factory=BandwidthRule)
    trimming: TrimmingSpec = field(default_factory=TrimmingSpec)
    lambda_outer: Literal["x", "xphi"] = "x"

    @classmethod
    def from_gd(cls, gd, **changes) -> "InferenceConfig":
        """Reuse the estimation kernel, bandwidth rule and trimming."""
        base = dict(kernel=gd.kernel, bw_rule=gd.bw_rule, trimming=gd.trimming)
        base.update(changes)
        return cls(**base)


def _index_and_h(dataset, beta_hat, bw_rule):
    b = as_coefficients(beta_hat, dataset.p)
    z = compute_index(dataset, b).z
    return z, bandwidth(bw_rule, z, dataset.n)


def estimate_lambda(
    dataset: Dataset,
    beta_hat,
    kernel: KernelSpec,
    bw_rule: BandwidthRule,
    trimming: TrimmingSpec | None = None,
    outer: Literal["x", "xphi"] = "x",
) -> np.ndarray:
    """Plug-in slope matrix (p x p). Zero when the trimming mask keeps nothing."""
    trimming = trimming or TrimmingSpec()
    n, p = dataset.n, dataset.p
    mask = trimming_mask(dataset, trimming)
    if not mask.any():
        return np.zeros((p, p))
    z, h = _index_and_h(dataset, beta_hat, bw_rule)
    gprime = nw_deriv(z, z, dataset.y, h, kernel).filled(0.0)
    if outer == "x":
        left, right = dataset.x, dataset.x
    elif outer == "xphi":
        left = right = dataset.x * mask[:, None]
    else:
        raise UsageError(f"unknown outer factor {outer!r}")
    centred = right - nw_conditional_mean(z, z, right, h, kernel).filled(0.0)
    w = mask * gprime
    return (left * w[:, None]).T @ centred / n


def estimate_sigma_xi(
    dataset: Dataset,
    beta_hat,
    kernel: KernelSpec,
    bw_rule: BandwidthRule,
    trimming: TrimmingSpec | None = None,
) -> np.ndarray:
    """Plug-in score variance (p x p), exactly symmetric.

    The link estimate is clamped to ``[1e-6, 1 - 1e-6]`` so the weights
    ``G(1 - G)`` stay positive even where a high-order kernel overshoots.
    """
    trimming = trimming or TrimmingSpec()
    n = dataset.n
    z, h = _index_and_h(dataset, beta_hat, bw_rule)
    xphi = dataset.x * trimming_mask(dataset, trimming)[:, None]
    g = np.clip(nw_full(z, z, dataset.y, h, kernel).filled(0.5), G_CLAMP, 1.0 - G_CLAMP)
    r = xphi - nw_conditional_mean(z, z, xphi, h, kernel).filled(0.0)
    s = (r * (g * (1.0 - g))[:, None]).T @ r / n
    return 0.5 * (s + s.T)


@dataclass(frozen=True)
class CovarianceEstimate:
    lambda_hat: np.ndarray
    sigma_xi_hat: np.ndarray
    sigma_beta_hat: np.ndarray
    se: np.ndarray
    n: int

    def identity_error(self) -> float:
        """Relative Frobenius error of ``Lambda Sigma_beta Lambda' = Sigma_xi``."""
        lhs = self.lambda_hat @ self.sigma_beta_hat @ self.lambda_hat.T
        den = np.linalg.norm(self.sigma_xi_hat)
        num = np.linalg.norm(lhs - self.sigma_xi_hat)
        return float(num / den) if den > 0 else float(num)

    def to_dict(self) -> dict:
        def mat(a):
            return {"rows": a.shape[0], "cols": a.shape[1], "data": [float(v) for v in a.ravel()]}

        return {
            "n": self.n,
            "p": int(self.se.shape[0]),
            "lambda_hat": mat(self.lambda_hat),
            "sigma_xi_hat": mat(self.sigma_xi_hat),
            "sigma_beta_hat": mat(self.sigma_beta_hat),
            "se": [float(v) for v in self.se],
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        return text


def sandwich(lam: np.ndarray, sigma_xi: np.ndarray, n: int) -> CovarianceEstimate:
    """``Lambda^-1 Sigma_xi Lambda^-T`` by two LU solves, plus standard errors.

    Raises :class:`InferenceError` when ``Lambda`` is numerically singular.
    """
    lam = np.asarray(lam, dtype=np.float64)
    sigma_xi = np.asarray(sigma_xi, dtype=np.float64)
    cond = np.linalg.cond(lam) if lam.size else 1.0
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise InferenceError(
            f"slope matrix is singular (condition number {cond:.3g}); try a larger sample "
            "or a different bandwidth"
        )
    left = np.linalg.solve(lam, sigma_xi)
    sb = np.linalg.solve(lam, left.T).T
    sb = 0.5 * (sb + sb.T)
    se = np.sqrt(np.clip(np.diag(sb), 0.0, None) / n)
    return CovarianceEstimate(lam, sigma_xi, sb, se, n)


def covariance(dataset: Dataset, beta_hat, config=None) -> CovarianceEstimate:
    """Plug-in covariance at ``beta_hat``.

    ``config`` is an :class:`InferenceConfig` or anything carrying
    ``kernel``, ``bw_rule`` and ``trimming`` (a ``GDConfig`` works).
    """
    if config is None:
        config = InferenceConfig()
    elif not isinstance(config, InferenceConfig):
        config = InferenceConfig.from_gd(config)
    lam = estimate_lambda(
        dataset, beta_hat, config.kernel, config.bw_rule, config.trimming, config.lambda_outer
    )
    sxi = estimate_sigma_xi(dataset, beta_hat, config.kernel, config.bw_rule, config.trimming)
    return sandwich(lam, sxi, dataset.n)


def known_link_covariance(
    dataset: Dataset, beta, G: Callable, G_prime: Callable
) -> CovarianceEstimate:
    """Sandwich for the estimator that uses a known link.

    Its estimating equation ``sum (G(z_i) - y_i) x_i = 0`` has slope
    ``E[G' x x']`` and score variance ``E[G(1 - G) x x']``.
    """
    b = as_coefficients(beta, dataset.p)
    z = compute_index(dataset, b).z
    x, n = dataset.x, dataset.n
    g = np.asarray(G(z), dtype=np.float64)
    gp = np.asarray(G_prime(z), dtype=np.float64)
    lam = (x * gp[:, None]).T @ x / n
    s = (x * (g * (1.0 - g))[:, None]).T @ x / n
    return sandwich(lam, 0.5 * (s + s.T), n)


def confidence_intervals(beta_hat, cov: CovarianceEstimate | np.ndarray, level: float = 0.95) -> np.ndarray:
    """Normal intervals, shape (p, 2): ``beta_j -/+ z_{(1+level)/2} * se_j``.

    ``cov`` may also be a plain vector of standard errors.
    """
    if not 0.0 < level < 1.0:
        raise UsageError("confidence level must lie strictly between 0 and 1")
    b = np.asarray(beta_hat, dtype=np.float64).reshape(-1)
    se = np.asarray(getattr(cov, "se", cov), dtype=np.float64).reshape(-1)
    if se.shape != b.shape:
        raise UsageError("coefficients and standard errors differ in length")
    q = stats.norm.ppf(0.5 + level / 2.0)
    half = q * se
    return np.column_stack([b - half, b + half])


@dataclass(frozen=True)
class CDFCurve:
    """Estimated link on a grid of index values.

    Grid points with a zero kernel denominator are dropped and counted in
    ``n_missing``.
    """

    grid: np.ndarray
    values: np.ndarray
    beta_used: np.ndarray
    n_missing: int = 0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["z", "G_hat"])
            for zv, gv in zip(self.grid, self.values):
                w.writerow([repr(float(zv)), repr(float(gv))])


def estimate_cdf_curve(
    dataset: Dataset,
    beta_hat,
    grid_spec=200,
    kernel: KernelSpec | None = None,
    bw_rule: BandwidthRule | None = None,
    isotonic: bool = False,
) -> CDFCurve:
    """NW estimate of the link on a grid over the fitted index.

    Parameters
    ----------
    grid_spec : int or array_like
        Number of evenly spaced points spanning ``[min z, max z]``, or the
        grid itself (strictly increasing).
    isotonic : bool
        Project the clamped curve onto non-decreasing sequences.
    """
    kernel = kernel or make_kernel(6)
    bw_rule = bw_rule or BandwidthRule()
    b = as_coefficients(beta_hat, dataset.p)
    z, h = _index_and_h(dataset, b, bw_rule)
    if np.ndim(grid_spec) == 0:
        m = int(grid_spec)
        if m < 0:
            raise UsageError("grid size must be non-negative")
        grid = np.linspace(z.min(), z.max(), m) if m > 1 else np.full(m, 0.5 * (z.min() + z.max()))
    else:
        grid = np.asarray(grid_spec, dtype=np.float64).reshape(-1)
        if grid.size > 1 and not np.all(np.diff(grid) > 0):
            raise UsageError("grid must be strictly increasing")
    if grid.size == 0:
        return CDFCurve(grid, np.zeros(0), b.copy(), 0)
    g = nw_full(grid, z, dataset.y, h, kernel)
    keep = ~np.ma.getmaskarray(g)
    vals = np.clip(g.data[keep], 0.0, 1.0)
    if isotonic and vals.size > 1:
        from scipy.optimize import isotonic_regression

        vals = np.clip(isotonic_regression(vals).x, 0.0, 1.0)
    return CDFCurve(grid[keep], vals, b.copy(), int((~keep).sum()))
