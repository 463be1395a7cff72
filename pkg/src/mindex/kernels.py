"""Compactly supported polynomial kernels and the bandwidth rule.

Every kernel here has the form ``K(u) = (1 - u**2) * r(u**2)`` on
``[-1, 1]`` and zero outside. Coefficients are kept as exact fractions so
the moment conditions can be checked by exact integration rather than by
sampling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Literal, Sequence

import numpy as np

from ._kern import pad_coeffs
from .errors import DegenerateDataError, UsageError

__all__ = [
    "KernelSpec",
    "MomentReport",
    "BandwidthRule",
    "make_kernel",
    "kernel_eval",
    "kernel_deriv",
    "verify_moments",
    "bandwidth",
]


def _poly_mul(a: Sequence[Fraction], b: Sequence[Fraction]) -> list[Fraction]:
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        for j, bj in enumerate(b):
            out[i + j] += ai * bj
    return out


def _divide_one_minus_t(c: Sequence[Fraction]) -> list[Fraction]:
    """Exact quotient of ``sum c_k t^k`` by ``(1 - t)``; raises if it does not divide."""
    if sum(c) != 0:
        raise UsageError("kernel polynomial must vanish at |u| = 1")
    # c(t) = (1 - t) r(t)  =>  r_k = r_{k-1} + c_k, with r_{-1} = 0
    r, acc = [], Fraction(0)
    for ck in c[:-1]:
        acc += ck
        r.append(acc)
    return r


def _horner(coeffs: np.ndarray, t):
    out = np.zeros_like(t) + coeffs[-1]
    for c in coeffs[-2::-1]:
        out = out * t + c
    return out


@dataclass(frozen=True)
class KernelSpec:
    """Even polynomial kernel of declared order.

    Parameters
    ----------
    order : int
        Declared order ``D``: moments ``1..D-1`` vanish, moment ``D`` does not.
    poly_coeffs : sequence of Fraction
        Coefficients of ``q`` in powers of ``t = u**2`` (``q(u) = sum c_k u^(2k)``).

    Attributes
    ----------
    cofactor : tuple of Fraction
        ``r`` with ``q(t) = (1 - t) r(t)``; evaluation uses this factored form so
        ``K(+-1)`` is exactly zero in floating point.
    deriv_coeffs : tuple of Fraction
        ``d`` with ``K'(u) = u * d(u**2)`` on ``(-1, 1)``.
    """

    order: int
    poly_coeffs: tuple[Fraction, ...]
    cofactor: tuple[Fraction, ...] = field(init=False)
    deriv_coeffs: tuple[Fraction, ...] = field(init=False)
    cofactor_f: np.ndarray = field(init=False, repr=False, compare=False)
    deriv_f: np.ndarray = field(init=False, repr=False, compare=False)
    cofactor_pad: np.ndarray = field(init=False, repr=False, compare=False)
    deriv_pad: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        c = tuple(Fraction(v) for v in self.poly_coeffs)
        if not c:
            raise UsageError("empty kernel polynomial")
        object.__setattr__(self, "poly_coeffs", c)
        r = _divide_one_minus_t(c)
        # K'(u) = 2u [(1 - t) r'(t) - r(t)]
        rp = [k * r[k] for k in range(1, len(r))] or [Fraction(0)]
        one_minus_t_rp = _poly_mul([Fraction(1), Fraction(-1)], rp)
        n = max(len(one_minus_t_rp), len(r))
        pad = lambda a: list(a) + [Fraction(0)] * (n - len(a))  # noqa: E731
        d = [2 * (a - b) for a, b in zip(pad(one_minus_t_rp), pad(r))]
        while len(d) > 1 and d[-1] == 0:
            d.pop()
        object.__setattr__(self, "cofactor", tuple(r))
        object.__setattr__(self, "deriv_coeffs", tuple(d))
        object.__setattr__(self, "cofactor_f", np.array([float(v) for v in r]))
        object.__setattr__(self, "deriv_f", np.array([float(v) for v in d]))
        object.__setattr__(self, "cofactor_pad", pad_coeffs(self.cofactor_f))
        object.__setattr__(self, "deriv_pad", pad_coeffs(self.deriv_f))

    def __call__(self, u):
        return kernel_eval(self, u)

    @property
    def k0(self) -> float:
        """Kernel value at the origin."""
        return float(self.poly_coeffs[0])


_F = Fraction


def make_kernel(order: int) -> KernelSpec:
    """Epanechnikov-family kernel of order 2, 4 or 6.

    * order 2: ``(3/4)(1 - u^2)``
    * order 4: ``(15/32)(1 - u^2)(3 - 7u^2)``
    * order 6: ``(525/256)(1 - u^2)(1 - 6u^2 + (33/5)u^4)``
    """
    one_minus_t = [_F(1), _F(-1)]
    if order == 2:
        q = [_F(3, 4) * v for v in one_minus_t]
    elif order == 4:
        q = [_F(15, 32) * v for v in _poly_mul(one_minus_t, [_F(3), _F(-7)])]
    elif order == 6:
        q = [_F(525, 256) * v for v in _poly_mul(one_minus_t, [_F(1), _F(-6), _F(33, 5)])]
    else:
        raise UsageError(f"unsupported kernel order {order!r}; choose 2, 4 or 6")
    return KernelSpec(order, tuple(q))


def kernel_eval(spec: KernelSpec, u):
    """``K(u)``; zero outside ``[-1, 1]``. Accepts scalars or arrays."""
    u = np.asarray(u, dtype=np.float64)
    t = u * u
    inside = np.abs(u) <= 1.0
    val = (1.0 - t) * _horner(spec.cofactor_f, t)
    out = np.where(inside, val, 0.0)
    return float(out) if out.ndim == 0 else out


def kernel_deriv(spec: KernelSpec, u):
    """``K'(u)`` on ``|u| <= 1`` (one-sided limit at the edges), zero outside."""
    u = np.asarray(u, dtype=np.float64)
    t = u * u
    inside = np.abs(u) <= 1.0
    val = u * _horner(spec.deriv_f, t)
    out = np.where(inside, val, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class MomentReport:
    order: int
    moments: tuple[Fraction, ...]
    tol: float
    passed: bool
    failures: tuple[str, ...]

    def as_dict(self) -> dict:
        return {
            "order": self.order,
            "tol": self.tol,
            "moments": [float(m) for m in self.moments],
            "moments_exact": [str(m) for m in self.moments],
            "pass": self.passed,
            "failures": list(self.failures),
        }


def verify_moments(spec: KernelSpec, tol: float = 1e-8, min_leading: float = 1e-3) -> MomentReport:
    """Exact moments ``int_{-1}^{1} u^v K(u) du`` for ``v = 0..D``.

    Integration is done term by term with rational arithmetic:
    ``int u^(v+2k) = 2/(v+2k+1)`` for even ``v + 2k`` and zero otherwise.
    """
    if tol <= 0:
        raise UsageError("tol must be positive")
    moments = []
    for v in range(spec.order + 1):
        if v % 2:
            moments.append(Fraction(0))
            continue
        moments.append(sum(c * Fraction(2, v + 2 * k + 1) for k, c in enumerate(spec.poly_coeffs)))
    failures = []
    if abs(float(moments[0]) - 1.0) >= tol:
        failures.append(f"integral is {float(moments[0]):.6g}, not 1")
    for v in range(1, spec.order):
        if abs(float(moments[v])) >= tol:
            failures.append(f"moment {v} is {float(moments[v]):.6g}, not 0")
    if abs(float(moments[spec.order])) <= min_leading:
        failures.append(f"moment {spec.order} is {float(moments[spec.order]):.6g}, too close to 0")
    return MomentReport(spec.order, tuple(moments), tol, not failures, tuple(failures))


@dataclass(frozen=True)
class BandwidthRule:
    """``h = std(z) * n**exponent`` (``index_std``) or a fixed ``h``."""

    exponent: float = -0.1
    scale_mode: Literal["index_std", "fixed"] = "index_std"
    fixed_value: float | None = None

    def __post_init__(self):
        if not self.exponent < 0:
            raise UsageError("bandwidth exponent must be negative")
        if self.scale_mode not in ("index_std", "fixed"):
            raise UsageError(f"unknown bandwidth scale mode {self.scale_mode!r}")
        if self.scale_mode == "fixed" and not (self.fixed_value and self.fixed_value > 0):
            raise UsageError("fixed bandwidth needs fixed_value > 0")


def bandwidth(rule: BandwidthRule, index, n: int) -> float:
    """Bandwidth for the index values ``index`` (IndexValues or array) at sample size ``n``.

    The sample standard deviation uses the ``n - 1`` denominator. ``n`` is
    passed separately because mini-batch steps scale by the full sample size
    while taking the spread from the subsample.
    """
    if rule.scale_mode == "fixed":
        return float(rule.fixed_value)
    if n < 2:
        raise UsageError("bandwidth needs n >= 2")
    z = np.asarray(getattr(index, "z", index), dtype=np.float64)
    if z.shape[0] < 2:
        raise DegenerateDataError("need at least two index values to estimate their spread")
    s = float(np.std(z, ddof=1))
    if not s > 0:
        raise DegenerateDataError("index has zero variance; bandwidth undefined")
    return s * float(n) ** rule.exponent
