"""Command-line front end: ``mindex {kernel-check,simulate,bench,estimate}``.

Settings come from flags, an optional flat TOML file (``--config``) and
built-in defaults, in that order of precedence. The base seed falls back to
the ``MINDEX_SEED`` environment variable when neither flag nor file sets it.

Exit status: 0 on success, 2 on usage errors, 3 on numerical failures. On
failure a JSON error report goes to stderr (and to ``<out>/error.json``
when an output directory is known).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .engines import GDConfig, StopRule, run_akmbgd
from .errors import (
    DegenerateDataError,
    MindexError,
    NumericalError,
    ParseError,
    SchemaError,
    UsageError,
)
from .inference import InferenceConfig, confidence_intervals, covariance, estimate_cdf_curve
from .kernels import BandwidthRule, make_kernel, verify_moments
from .logit import logit_init
from .model import Dataset, TrimmingSpec
from .nw import TruncationFloor
from .simulation import DGPSpec, run_bench, run_monte_carlo, write_traces_csv

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

__all__ = ["main", "ingest_csv", "CSVSchema", "resolve_settings", "OPTIONS"]


def _choice(*allowed):
    def conv(v):
        v = str(v)
        if v not in allowed:
            raise ValueError(f"must be one of {', '.join(allowed)}")
        return v

    return conv


def _csv_list(v):
    if isinstance(v, (list, tuple)):
        return [str(s) for s in v]
    return [s.strip() for s in str(v).split(",") if s.strip()]


@dataclass(frozen=True)
class Opt:
    flag: str
    conv: Callable
    default: Any
    help: str
    commands: tuple[str, ...]

    @property
    def key(self) -> str:
        return self.flag.lstrip("-").replace("-", "_")


_SIM = ("simulate", "bench")
_GDC = ("simulate", "bench", "estimate")
_ALL = ("kernel-check", "simulate", "bench", "estimate")

OPTIONS = [
    Opt("--order", int, 6, "kernel order to check", ("kernel-check",)),
    Opt("--tol", float, 1e-8, "moment tolerance", ("kernel-check",)),
    Opt("--n", int, 5000, "sample size", _SIM),
    Opt("--p", int, 10, "number of free covariates", _SIM),
    Opt("--reps", int, 10, "Monte Carlo replications", ("simulate",)),
    Opt("--error", _choice("cauchy", "chisq3", "normal", "logistic"), "normal", "error family", _SIM),
    Opt("--iters", int, 100, "updates per benchmarked algorithm", ("bench",)),
    Opt("--algorithms", _csv_list, ["kbgd-naive", "kbgd-fast", "kmbgd-naive", "kmbgd-fast", "bgd_known"],
        "comma-separated algorithms to benchmark", ("bench",)),
    Opt("--seed", int, 0, "base seed (falls back to MINDEX_SEED)", _GDC),
    Opt("--B", int, 1000, "subsample size", _GDC),
    Opt("--delta", float, 1.0, "learning rate", _GDC),
    Opt("--burn-in", int, 2000, "burn-in updates before averaging", _GDC),
    Opt("--follow-T", int, 3000, "averaged updates after burn-in", _GDC),
    Opt("--stop-window", int, None, "stopping-rule window T (enables the rule)", _GDC),
    Opt("--stop-gap", int, 1000, "stopping-rule gap", _GDC),
    Opt("--rho", float, 1e-3, "stopping-rule tolerance", _GDC),
    Opt("--max-iters", int, 200000, "update cap when the stopping rule is on", _GDC),
    Opt("--kernel-order", int, 6, "kernel order (2, 4 or 6)", _GDC),
    Opt("--bw-exponent", float, -0.1, "bandwidth exponent on n", _GDC),
    Opt("--trim", _choice("none", "box", "quantile"), "none", "trimming mode", _GDC),
    Opt("--phi", float, 0.0, "trimming level (box: |x| <= 1-phi; quantile: [phi, 1-phi])", _GDC),
    Opt("--c-f", float, None, "fixed truncation floor (default: data-adaptive)", _GDC),
    Opt("--floor-fraction", float, 0.001, "adaptive floor as a fraction of the median density", _GDC),
    Opt("--method", _choice("fast", "naive"), "fast", "kernel-sum evaluation path", _GDC),
    Opt("--threads", int, 1, "worker processes for replications", _SIM),
    Opt("--data", str, None, "input CSV", ("estimate",)),
    Opt("--y-column", str, "y", "outcome column", ("estimate",)),
    Opt("--x0-column", str, "x0", "column with coefficient normalized to one", ("estimate",)),
    Opt("--covariates", _csv_list, None, "free covariate columns (default: all others)", ("estimate",)),
    Opt("--standardize", _csv_list, [], "columns to standardize", ("estimate",)),
    Opt("--negate-standardize", _csv_list, [], "columns to standardize with a sign flip", ("estimate",)),
    Opt("--level", float, 0.95, "confidence level", ("estimate",)),
    Opt("--grid-points", int, 200, "points on the exported link curve", ("estimate",)),
    Opt("--out", str, None, "output directory", _ALL),
]

_BY_KEY = {o.key: o for o in OPTIONS}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mindex", description="Monotone index model estimation")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "kernel-check": "verify kernel moment conditions",
        "simulate": "Monte Carlo bias / RMSE / coverage",
        "bench": "per-update timing and error traces",
        "estimate": "fit a CSV dataset",
    }
    for cmd, text in helps.items():
        sp = sub.add_parser(cmd, help=text)
        sp.add_argument("--config", default=None, help="flat TOML file with key = value settings")
        for o in OPTIONS:
            if cmd in o.commands:
                sp.add_argument(o.flag, dest=o.key, default=None, type=str, help=o.help)
    return parser


def _convert(key: str, value, source: str):
    opt = _BY_KEY[key]
    try:
        return opt.conv(value)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad value for {key} ({source}): {value!r}: {exc}") from None


def _load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"cannot parse config file {path}: {exc}") from None
    flat = {}
    for k, v in data.items():
        if isinstance(v, dict):
            raise UsageError(f"config file must be flat; table [{k}] not allowed")
        flat[k.replace("-", "_")] = v
    return flat


def resolve_settings(command: str, flags: dict, file_values: dict | None = None, env=None) -> dict:
    """Merge settings: flag > config file > (MINDEX_SEED for the seed) > default."""
    env = os.environ if env is None else env
    file_values = file_values or {}
    allowed = {o.key for o in OPTIONS if command in o.commands}
    unknown = sorted(set(file_values) - allowed)
    if unknown:
        raise UsageError(f"unknown config keys for {command}: {', '.join(unknown)}")
    out = {}
    for key in sorted(allowed):
        if flags.get(key) is not None:
            out[key] = _convert(key, flags[key], "flag")
        elif key in file_values:
            out[key] = _convert(key, file_values[key], "config file")
        elif key == "seed" and env.get("MINDEX_SEED"):
            out[key] = _convert(key, env["MINDEX_SEED"], "MINDEX_SEED")
        else:
            out[key] = _BY_KEY[key].default
    return out


def gd_config_from(s: dict) -> GDConfig:
    trim = s["trim"]
    if trim == "quantile":
        trimming = TrimmingSpec("quantile", lo=s["phi"], hi=1.0 - s["phi"])
    else:
        trimming = TrimmingSpec(trim, phi=s["phi"] if trim == "box" else 0.0)
    if s["c_f"] is not None:
        floor = TruncationFloor(c_f=s["c_f"], selection_mode="fixed")
    else:
        floor = TruncationFloor(selection_mode="density_fraction", fraction=s["floor_fraction"])
    stop = None
    if s["stop_window"] is not None:
        stop = StopRule(s["stop_window"], s["stop_gap"], s["rho"])
    return GDConfig(
        delta=s["delta"],
        trimming=trimming,
        floor=floor,
        B=s["B"],
        kernel=make_kernel(s["kernel_order"]),
        bw_rule=BandwidthRule(exponent=s["bw_exponent"]),
        burn_in=s["burn_in"],
        follow_T=s["follow_T"],
        stop=stop,
        max_iters=s["max_iters"],
        seed=s["seed"],
        method=s["method"],
    )


@dataclass(frozen=True)
class CSVSchema:
    """Column roles and transforms for :func:`ingest_csv`."""

    y_column: str = "y"
    x0_column: str = "x0"
    covariate_columns: list[str] | None = None
    standardize: list[str] = field(default_factory=list)
    negate_standardize: list[str] = field(default_factory=list)


def _standardize(col: np.ndarray, name: str, negate: bool) -> tuple[np.ndarray, dict]:
    mean = float(col.mean())
    sd = float(col.std(ddof=1)) if col.shape[0] > 1 else 0.0
    if not sd > 0:
        raise DegenerateDataError(f"column {name!r} has zero standard deviation; cannot standardize")
    out = (col - mean) / sd
    if negate:
        out = -out
    return out, {"column": name, "mean": mean, "std": sd, "negated": negate}


def ingest_csv(path, schema: CSVSchema) -> tuple[Dataset, dict]:
    """Read a comma-separated file with a header row into a :class:`Dataset`.

    Standardization uses the full-column mean and sample standard deviation.
    Returns the dataset and a summary dict (n, p, transforms).
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise UsageError(f"data file not found: {path}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path} is empty") from None
        rows = [r for r in reader if any(c.strip() for c in r)]
    pos = {name: i for i, name in enumerate(header)}
    covs = schema.covariate_columns
    if covs is None:
        covs = [h for h in header if h not in (schema.y_column, schema.x0_column)]
    needed = [schema.y_column, schema.x0_column, *covs]
    missing = [c for c in needed + list(schema.standardize) + list(schema.negate_standardize) if c not in pos]
    if missing:
        raise SchemaError(f"columns not in header: {', '.join(dict.fromkeys(missing))}")
    both = set(schema.standardize) & set(schema.negate_standardize)
    if both:
        raise SchemaError(f"columns listed under both transforms: {', '.join(sorted(both))}")
    cols = {c: np.empty(len(rows)) for c in dict.fromkeys(needed)}
    for r_i, row in enumerate(rows, start=2):  # header is line 1
        if len(row) != len(header):
            raise ParseError(f"line {r_i} has {len(row)} fields, header has {len(header)}", r_i, None)
        for c, arr in cols.items():
            cell = row[pos[c]].strip()
            try:
                arr[r_i - 2] = float(cell)
            except ValueError:
                raise ParseError(f"non-numeric value {cell!r} at line {r_i}, column {c!r}", r_i, c) from None
    y = cols[schema.y_column]
    if not np.all((y == 0.0) | (y == 1.0)):
        bad = np.flatnonzero((y != 0.0) & (y != 1.0))[0]
        raise SchemaError(
            f"outcome column {schema.y_column!r} must be 0/1; found {y[bad]!r} at line {bad + 2}"
        )
    transforms = []
    for name in [*schema.standardize, *schema.negate_standardize]:
        if name not in cols:
            continue
        cols[name], info = _standardize(cols[name], name, name in schema.negate_standardize)
        transforms.append(info)
    x = np.column_stack([cols[c] for c in covs]) if covs else np.empty((len(rows), 0))
    ds = Dataset(cols[schema.x0_column], x, y, tuple(covs))
    return ds, {"path": str(path), "n": ds.n, "p": ds.p, "covariates": list(covs), "transforms": transforms}


def _outdir(s) -> Path | None:
    if s.get("out") is None:
        return None
    d = Path(s["out"])
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write(path: Path, text: str) -> None:
    path.write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")


def cmd_kernel_check(s: dict) -> int:
    rep = verify_moments(make_kernel(s["order"]), tol=s["tol"])
    text = json.dumps(rep.as_dict(), indent=2)
    print(text)
    out = _outdir(s)
    if out:
        _write(out / "kernel_check.json", text)
    return 0 if rep.passed else 3


def cmd_simulate(s: dict) -> int:
    dgp = DGPSpec(s["n"], s["p"], s["error"], seed=s["seed"])
    gd = gd_config_from(s)
    rep = run_monte_carlo(dgp, gd, s["reps"], threads=s["threads"])
    table = rep.to_table()
    print(table, end="")
    if rep.partial:
        print(f"warning: {rep.n_failed} of {rep.R} replications failed", file=sys.stderr)
    out = _outdir(s)
    if out:
        _write(out / "report.json", rep.to_json())
        _write(out / "table.txt", table)
    return 0


def _bench_configs(s: dict) -> list[tuple[str, GDConfig]]:
    base = gd_config_from(s)
    out = []
    for tag in s["algorithms"]:
        if tag == "bgd_known":
            out.append(("bgd_known", base))
            continue
        alg, _, method = tag.partition("-")
        if alg not in ("kbgd", "kmbgd") or method not in ("fast", "naive"):
            raise UsageError(f"unknown algorithm {tag!r}")
        out.append((alg, base.replace(method=method)))
    return out


def cmd_bench(s: dict) -> int:
    if s["threads"] != 1:
        print("warning: benchmarks run serially; --threads ignored", file=sys.stderr)
    dgp = DGPSpec(s["n"], s["p"], s["error"], seed=s["seed"])
    traces = run_bench(dgp, _bench_configs(s), s["iters"])
    summary = []
    for t in traces:
        steps = t.step_seconds
        summary.append(
            {
                "algorithm": t.algorithm,
                "updates": int(t.k.shape[0]),
                "median_update_seconds": float(np.median(steps)) if steps.size else None,
                "final_rmse": float(t.rmse[-1]) if t.rmse.size else None,
                "diverged": t.diverged,
                "message": t.message,
            }
        )
    text = json.dumps(summary, indent=2)
    print(text)
    out = _outdir(s)
    if out:
        write_traces_csv(traces, out / "bench.csv")
        _write(out / "bench_summary.json", text)
    return 0


def cmd_estimate(s: dict) -> int:
    if not s["data"]:
        raise UsageError("estimate needs --data <csv>")
    schema = CSVSchema(
        s["y_column"], s["x0_column"], s["covariates"], s["standardize"], s["negate_standardize"]
    )
    data, summary = ingest_csv(s["data"], schema)
    gd = gd_config_from(s)
    beta0 = logit_init(data)
    est = run_akmbgd(data, gd, beta0=beta0)
    cov = covariance(data, est.beta_bar, InferenceConfig.from_gd(gd))
    ci = confidence_intervals(est.beta_bar, cov, s["level"])
    curve = estimate_cdf_curve(data, est.beta_bar, s["grid_points"], gd.kernel, gd.bw_rule)
    names = list(data.names)
    coefs = [
        {"name": nm, "estimate": float(b), "se": float(se), "ci_low": float(lo), "ci_high": float(hi)}
        for nm, b, se, (lo, hi) in zip(names, est.beta_bar, cov.se, ci)
    ]
    diag = {k: v for k, v in est.diagnostics().items() if k != "seconds"}
    report = {
        "data": summary,
        "level": s["level"],
        "start": [float(v) for v in beta0],
        "coefficients": coefs,
        "diagnostics": diag,
        "identity_error": cov.identity_error(),
        "curve_missing_points": curve.n_missing,
    }
    w = max(len(n) for n in names)
    print(f"{'':{w}}  {'estimate':>10}  {'se':>9}  {'ci_low':>10}  {'ci_high':>10}")
    for c in coefs:
        print(f"{c['name']:{w}}  {c['estimate']:10.4f}  {c['se']:9.4f}  {c['ci_low']:10.4f}  {c['ci_high']:10.4f}")
    if est.warning:
        print(f"warning: {est.warning}", file=sys.stderr)
    out = _outdir(s)
    if out:
        _write(out / "estimate.json", json.dumps(report, indent=2))
        cov.to_json(out / "covariance.json")
        curve.to_csv(out / "cdf_curve.csv")
    return 0


_COMMANDS = {
    "kernel-check": cmd_kernel_check,
    "simulate": cmd_simulate,
    "bench": cmd_bench,
    "estimate": cmd_estimate,
}


def _fail(exc: Exception, status: int, out: Path | None) -> int:
    report = {"status": status, "error": type(exc).__name__, "message": str(exc)}
    for attr in ("k", "norm", "row", "column"):
        if hasattr(exc, attr):
            report[attr] = getattr(exc, attr)
    text = json.dumps(report, indent=2)
    print(text, file=sys.stderr)
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            _write(out / "error.json", text)
        except OSError:
            pass
    return status


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    out = Path(flags["out"]) if flags.get("out") else None
    try:
        file_values = _load_config(args.config) if args.config else {}
        s = resolve_settings(args.command, flags, file_values)
        out = Path(s["out"]) if s.get("out") else None
        return _COMMANDS[args.command](s)
    except UsageError as exc:
        return _fail(exc, 2, out)
    except NumericalError as exc:
        return _fail(exc, 3, out)
    except MindexError as exc:  # pragma: no cover
        return _fail(exc, 3, out)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
