"""Compiled kernel-sum loops.

Both loops visit data points in ascending index order of the (pre-sorted)
data and add exactly the same terms; the windowed loop only skips terms whose
kernel weight is exactly zero. That makes the two paths agree bitwise.

Kernel polynomials arrive as 4 Horner coefficients in ``t = u*u``
(zero-padded; padding does not change any floating-point result).
"""

from __future__ import annotations

import numba as nb
import numpy as np

NCOEF = 4


def pad_coeffs(c) -> np.ndarray:
    c = np.asarray(c, dtype=np.float64)
    if c.shape[0] > NCOEF:
        raise ValueError(f"kernel polynomials above degree {2 * NCOEF} in u are not supported")
    out = np.zeros(NCOEF)
    out[: c.shape[0]] = c
    return out


@nb.njit(cache=True, inline="always")
def _kval(c, u):
    if u > 1.0 or u < -1.0:
        return 0.0
    t = u * u
    return (1.0 - t) * (((c[3] * t + c[2]) * t + c[1]) * t + c[0])


@nb.njit(cache=True, inline="always")
def _kder(d, u):
    if u > 1.0 or u < -1.0:
        return 0.0
    t = u * u
    return u * (((d[3] * t + d[2]) * t + d[1]) * t + d[0])


@nb.njit(cache=True)
def _window(zs, e, hinv):
    """Half-open range [lo, hi) of sorted ``zs`` with ``|(e - z) * hinv| <= 1``.

    Uses the same floating-point predicate as the kernel itself, so the
    window is exactly the support of the kernel weights.
    """
    m = zs.shape[0]
    # first j with (e - zs[j]) * hinv <= 1  (predicate monotone in j)
    a, b = 0, m
    while a < b:
        mid = (a + b) >> 1
        if (e - zs[mid]) * hinv <= 1.0:
            b = mid
        else:
            a = mid + 1
    lo = a
    # first j with (e - zs[j]) * hinv < -1
    a, b = lo, m
    while a < b:
        mid = (a + b) >> 1
        if (e - zs[mid]) * hinv < -1.0:
            b = mid
        else:
            a = mid + 1
    return lo, a


@nb.njit(cache=True)
def _sums_single(ez, zs, w, hinv, c, windowed):
    ne = ez.shape[0]
    m = zs.shape[0]
    out = np.zeros((ne, 2))
    c0, c1, c2, c3 = c[0], c[1], c[2], c[3]
    for i in range(ne):
        e = ez[i]
        if windowed:
            lo, hi = _window(zs, e, hinv)
        else:
            lo, hi = 0, m
        s0 = 0.0
        s1 = 0.0
        if windowed:
            # every j in the window has |u| <= 1, so the support test is skipped
            for j in range(lo, hi):
                u = (e - zs[j]) * hinv
                t = u * u
                k = (1.0 - t) * (((c3 * t + c2) * t + c1) * t + c0)
                s0 += k
                s1 += k * w[j, 0]
        else:
            for j in range(lo, hi):
                u = (e - zs[j]) * hinv
                if u > 1.0 or u < -1.0:
                    k = 0.0
                else:
                    t = u * u
                    k = (1.0 - t) * (((c3 * t + c2) * t + c1) * t + c0)
                s0 += k
                s1 += k * w[j, 0]
        out[i, 0] = s0
        out[i, 1] = s1
    return out


@nb.njit(cache=True)
def _sums_general(ez, zs, w, hinv, coef, dcoef, deriv, windowed):
    ne = ez.shape[0]
    m = zs.shape[0]
    q = w.shape[1]
    out = np.zeros((ne, q + 1))
    acc = np.zeros(q)
    for i in range(ne):
        e = ez[i]
        if windowed:
            lo, hi = _window(zs, e, hinv)
        else:
            lo, hi = 0, m
        s0 = 0.0
        acc[:] = 0.0
        for j in range(lo, hi):
            u = (e - zs[j]) * hinv
            if deriv:
                k = _kder(dcoef, u)
            else:
                k = _kval(coef, u)
            s0 += k
            for cc in range(q):
                acc[cc] += k * w[j, cc]
        out[i, 0] = s0
        for cc in range(q):
            out[i, 1 + cc] = acc[cc]
    return out


def kernel_sums(ez, zs, w, h, coef, dcoef, deriv, windowed):
    """Raw sums ``S[e, 0] = sum_j K(u_ej)`` and ``S[e, 1+c] = sum_j K(u_ej) w[j, c]``.

    ``u_ej = (z_e - z_j) / h`` (computed as a product with ``1/h``). With
    ``deriv`` the derivative ``K'`` replaces ``K``. ``zs`` must be sorted
    ascending and ``w`` (2-d) aligned with it; ``coef``/``dcoef`` come from
    :func:`pad_coeffs`.
    """
    hinv = 1.0 / h
    if w.shape[1] == 1 and not deriv:
        return _sums_single(ez, zs, w, hinv, coef, windowed)
    return _sums_general(ez, zs, w, hinv, coef, dcoef, deriv, windowed)


@nb.njit(cache=True)
def weighted_gradient(r, x):
    """``sum_i r_i x_i`` accumulated in row order (fixed reduction order)."""
    n, p = x.shape
    g = np.zeros(p)
    for i in range(n):
        ri = r[i]
        for j in range(p):
            g[j] += ri * x[i, j]
    return g
