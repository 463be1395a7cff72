"""Nadaraya-Watson regression on a scalar index.

Two evaluation paths compute the same kernel sums:

* ``naive``: every eval point against every data point, ``O(m_eval * m)``;
* ``fast``: data sorted once, each eval point only visits the window
  ``|z - z_j| <= h`` found by binary search (the kernel vanishes outside).

Both sum in ascending data-z order, so they return identical floats.

Outputs at points whose kernel denominator is exactly zero are returned
masked (``numpy.ma``), never as NaN.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from . import _kern
from .errors import UsageError
from .kernels import KernelSpec

__all__ = [
    "NWComponents",
    "TruncationFloor",
    "kernel_components",
    "fast_window_eval",
    "naive_eval",
    "nw_full",
    "nw_subsample_truncated",
    "nw_deriv",
    "nw_conditional_mean",
    "resolve_floor",
    "ratio_at_data",
]

Method = Literal["fast", "naive"]


@dataclass(frozen=True)
class NWComponents:
    """Kernel averages at each eval point.

    ``den[e] = (1/(m h)) sum_j K((z_e - z_j)/h)`` and
    ``num[e, c] = (1/(m h)) sum_j K((z_e - z_j)/h) w[j, c]``. With high-order
    kernels both can be negative.
    """

    num: np.ndarray
    den: np.ndarray


@dataclass(frozen=True)
class TruncationFloor:
    """Lower bound applied to the subsample density estimate.

    ``selection_mode="fixed"`` uses ``c_f`` as given. ``"density_fraction"``
    sets ``c_f = fraction * median`` of the full-sample density estimate at
    the initial iterate (see :func:`resolve_floor`).
    """

    c_f: float | None = None
    selection_mode: Literal["fixed", "density_fraction"] = "density_fraction"
    fraction: float = 0.001

    def __post_init__(self):
        if self.selection_mode not in ("fixed", "density_fraction"):
            raise UsageError(f"unknown floor mode {self.selection_mode!r}")
        if self.selection_mode == "fixed" and not (self.c_f is not None and self.c_f > 0):
            raise UsageError("fixed truncation floor needs c_f > 0")
        if self.selection_mode == "density_fraction" and not self.fraction > 0:
            raise UsageError("floor fraction must be positive")


def _check(h, data_z, weights=None):
    if not (np.isfinite(h) and h > 0):
        raise UsageError(f"bandwidth must be positive, got {h!r}")
    if data_z.shape[0] < 1:
        raise UsageError("no data points")
    if weights is not None and weights.shape[0] != data_z.shape[0]:
        raise UsageError("data_z and weights differ in length")


def _as_weights(w) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.ndim == 1:
        w = w[:, None]
    return w


def _raw_sums(eval_z, data_z, weights, h, kernel: KernelSpec, method: Method, deriv=False):
    eval_z = np.ascontiguousarray(eval_z, dtype=np.float64).reshape(-1)
    data_z = np.asarray(data_z, dtype=np.float64).reshape(-1)
    weights = _as_weights(weights)
    _check(h, data_z, weights)
    if method not in ("fast", "naive"):
        raise UsageError(f"unknown method {method!r}")
    order = np.argsort(data_z, kind="stable")
    zs = np.ascontiguousarray(data_z[order])
    ws = np.ascontiguousarray(weights[order])
    return _kern.kernel_sums(
        eval_z, zs, ws, float(h), kernel.cofactor_pad, kernel.deriv_pad, deriv, method == "fast"
    )


def kernel_components(eval_z, data_z, weights, h, kernel, method: Method = "fast") -> NWComponents:
    """Kernel averages ``A_1`` (den) and ``A_w`` (num, one column per weight column)."""
    s = _raw_sums(eval_z, data_z, weights, h, kernel, method)
    scale = 1.0 / (np.asarray(data_z).shape[0] * h)
    return NWComponents(num=s[:, 1:] * scale, den=s[:, 0] * scale)


def fast_window_eval(eval_z, data_z, weights, h, kernel) -> NWComponents:
    return kernel_components(eval_z, data_z, weights, h, kernel, "fast")


def naive_eval(eval_z, data_z, weights, h, kernel) -> NWComponents:
    return kernel_components(eval_z, data_z, weights, h, kernel, "naive")


def nw_full(eval_z, data_z, y, h, kernel, method: Method = "fast") -> np.ma.MaskedArray:
    """Full-sample estimate of ``E(y | z)``; masked where the denominator is zero."""
    comp = kernel_components(eval_z, data_z, y, h, kernel, method)
    den = comp.den
    bad = den == 0.0
    safe = np.where(bad, 1.0, den)
    g = np.where(bad, 0.0, comp.num[:, 0] / safe)
    return np.ma.MaskedArray(g, mask=bad)


def nw_subsample_truncated(eval_z, sub_z, sub_y, h, kernel, floor, method: Method = "fast") -> np.ndarray:
    """Subsample estimate with the denominator floored at ``c_f``: ``num / max(den, c_f)``.

    ``floor`` is a positive float or a fixed-mode :class:`TruncationFloor`.
    Duplicate subsample points count with multiplicity.
    """
    c_f = _floor_value(floor)
    sub_z = np.asarray(sub_z, dtype=np.float64).reshape(-1)
    if sub_z.shape[0] == 0:
        raise UsageError("empty subsample")
    comp = kernel_components(eval_z, sub_z, sub_y, h, kernel, method)
    return comp.num[:, 0] / np.maximum(comp.den, c_f)


def _floor_value(floor) -> float:
    if isinstance(floor, TruncationFloor):
        if floor.c_f is None:
            raise UsageError("truncation floor not resolved; call resolve_floor first")
        c = float(floor.c_f)
    else:
        c = float(floor)
    if not c > 0:
        raise UsageError("truncation floor must be positive")
    return c


def resolve_floor(floor: TruncationFloor, data_z, h, kernel, max_points: int = 5000) -> float:
    """Numeric ``c_f`` for a run.

    In ``density_fraction`` mode this is ``fraction`` times the median
    full-sample density estimate. For ``n > max_points`` the median is taken
    over ``max_points`` evaluation points at evenly spaced ranks of the
    sorted index (still against all ``n`` data points), which keeps the cost
    linear in ``n``.
    """
    if floor.selection_mode == "fixed":
        return float(floor.c_f)
    z = np.asarray(data_z, dtype=np.float64)
    n = z.shape[0]
    if n > max_points:
        zs = np.sort(z)
        ez = zs[np.linspace(0, n - 1, max_points).round().astype(np.int64)]
    else:
        ez = z
    comp = kernel_components(ez, z, np.ones(n), h, kernel, "fast")
    med = float(np.median(comp.den))
    if not med > 0:
        raise UsageError("median density estimate is not positive; set c_f explicitly")
    return floor.fraction * med


def nw_deriv(eval_z, data_z, y, h, kernel, method: Method = "fast") -> np.ma.MaskedArray:
    """Derivative of the NW ratio, ``(A'_y A_1 - A_y A'_1) / A_1**2``.

    ``A'`` uses ``K'`` and the extra ``1/h`` from the chain rule.
    """
    data_z = np.asarray(data_z, dtype=np.float64).reshape(-1)
    m = data_z.shape[0]
    s = _raw_sums(eval_z, data_z, y, h, kernel, method)
    d = _raw_sums(eval_z, data_z, y, h, kernel, method, deriv=True)
    a1, ay = s[:, 0] / (m * h), s[:, 1] / (m * h)
    d1, dy = d[:, 0] / (m * h * h), d[:, 1] / (m * h * h)
    bad = a1 == 0.0
    safe = np.where(bad, 1.0, a1)
    g = np.where(bad, 0.0, (dy * a1 - ay * d1) / (safe * safe))
    return np.ma.MaskedArray(g, mask=bad)


def nw_conditional_mean(eval_z, data_z, columns, h, kernel, method: Method = "fast") -> np.ma.MaskedArray:
    """Column-wise NW regression of ``columns`` (m x q) on ``data_z``; one pass per eval point."""
    eval_z = np.asarray(eval_z, dtype=np.float64).reshape(-1)
    cols = np.asarray(columns, dtype=np.float64)
    if cols.ndim == 1:
        cols = cols[:, None]
    q = cols.shape[1]
    if q == 0:
        _check(h, np.asarray(data_z).reshape(-1))
        return np.ma.MaskedArray(np.zeros((eval_z.shape[0], 0)))
    comp = kernel_components(eval_z, data_z, cols, h, kernel, method)
    bad = comp.den == 0.0
    safe = np.where(bad, 1.0, comp.den)
    out = np.where(bad[:, None], 0.0, comp.num / safe[:, None])
    return np.ma.MaskedArray(out, mask=np.repeat(bad[:, None], q, axis=1))


def ratio_at_data(z, y, h, kernel, floor: float | None = None, method: Method = "fast") -> np.ndarray:
    """NW ratio evaluated at the data points themselves, self-terms included.

    Returns values in the original order of ``z``. With ``floor=None`` the
    plain ratio ``num/den`` is used (``den > 0`` is required at every point);
    otherwise ``num / max(den, floor)``. This is the hot path of the
    gradient steps, so the data are sorted only once and serve as both the
    evaluation set and the kernel centres.
    """
    z = np.asarray(z, dtype=np.float64)
    m = z.shape[0]
    if m == 0:
        raise UsageError("empty sample")
    _check(h, z)
    order = np.argsort(z, kind="stable")
    zs = np.ascontiguousarray(z[order])
    ws = np.ascontiguousarray(np.asarray(y, dtype=np.float64)[order][:, None])
    s = _kern.kernel_sums(zs, zs, ws, float(h), kernel.cofactor_pad, kernel.deriv_pad, False, method == "fast")
    scale = 1.0 / (m * h)
    num = s[:, 1] * scale
    den = s[:, 0] * scale
    if floor is None:
        g_sorted = num / den
    else:
        g_sorted = num / np.maximum(den, floor)
    g = np.empty(m)
    g[order] = g_sorted
    return g
