"""Data representation for the binary monotone index model.

The model is ``y = 1(x0 + x @ beta - u > 0)`` where the coefficient on
``x0`` is normalized to one, so only the ``p`` free coefficients are ever
stored or estimated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import UsageError

__all__ = [
    "Dataset",
    "TrimmingSpec",
    "IndexValues",
    "as_coefficients",
    "compute_index",
    "index_array",
    "trimming_mask",
]


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Immutable design: normalized covariate ``x0``, free covariates ``x``, outcomes ``y``.

    Parameters
    ----------
    x0 : array of shape (n,)
        Covariate whose coefficient is fixed at one.
    x : array of shape (n, p)
        Free covariates. A 1-d array is read as a single column.
    y : array of shape (n,)
        Binary outcomes in {0, 1}.
    names : tuple of str, optional
        Column names of ``x`` (used in reports).
    """

    x0: np.ndarray
    x: np.ndarray
    y: np.ndarray
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=np.float64)
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if x0.ndim != 1 or y.ndim != 1 or x.ndim != 2:
            raise UsageError("x0 and y must be 1-d and x must be 2-d")
        n = x0.shape[0]
        if n < 2:
            raise UsageError(f"need at least 2 observations, got {n}")
        if x.shape[0] != n or y.shape[0] != n:
            raise UsageError(
                f"row mismatch: x0 has {n}, x has {x.shape[0]}, y has {y.shape[0]}"
            )
        if x.shape[1] < 1:
            raise UsageError("need at least one free covariate")
        if not (np.all(np.isfinite(x0)) and np.all(np.isfinite(x))):
            raise UsageError("covariates contain non-finite entries")
        if not np.all((y == 0.0) | (y == 1.0)):
            raise UsageError("outcomes must be 0 or 1")
        if self.names is not None and len(self.names) != x.shape[1]:
            raise UsageError("names must have one entry per column of x")
        object.__setattr__(self, "x0", _readonly(x0))
        object.__setattr__(self, "x", _readonly(np.ascontiguousarray(x)))
        object.__setattr__(self, "y", _readonly(y))

    @property
    def n(self) -> int:
        return self.x0.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def xe(self) -> np.ndarray:
        """All covariates including ``x0`` as the first column, shape (n, p+1)."""
        return np.column_stack([self.x0, self.x])

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.x0[rows], self.x[rows], self.y[rows], self.names)


def as_coefficients(beta, p: int | None = None) -> np.ndarray:
    """Validate a free-coefficient vector and return it as a float array."""
    b = np.asarray(beta, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(b)):
        raise UsageError("coefficients must be finite")
    if p is not None and b.shape[0] != p:
        raise UsageError(f"expected {p} coefficients, got {b.shape[0]}")
    return b


@dataclass(frozen=True)
class IndexValues:
    """Index ``z_i = x0_i + <x_i, beta>`` together with the coefficients used."""

    z: np.ndarray
    beta_used: np.ndarray

    def __len__(self):
        return self.z.shape[0]


def index_array(x0: np.ndarray, x: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Raw index computation with a fixed accumulation order.

    Columns are added one at a time in ascending order, so the result for
    row ``i`` depends only on that row and ``beta``. Gathered subsets of rows
    therefore reproduce the full-sample values bitwise.
    """
    z = np.array(x0, dtype=np.float64, copy=True)
    for j in range(x.shape[1]):
        z += x[:, j] * beta[j]
    return z


def compute_index(dataset: Dataset, beta) -> IndexValues:
    b = as_coefficients(beta, dataset.p)
    return IndexValues(index_array(dataset.x0, dataset.x, b), b.copy())


@dataclass(frozen=True)
class TrimmingSpec:
    """Which observations contribute to the gradient.

    ``mode="box"`` keeps observation ``i`` iff every covariate (``x0``
    included) satisfies ``|value| <= 1 - phi``. ``mode="quantile"`` keeps it
    iff every covariate lies inside that column's empirical ``[lo, hi]``
    quantile band. ``mode="none"`` keeps everything.
    """

    mode: Literal["none", "box", "quantile"] = "none"
    phi: float = 0.0
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if self.mode not in ("none", "box", "quantile"):
            raise UsageError(f"unknown trimming mode {self.mode!r}")
        if self.mode == "box" and not (0.0 <= self.phi < 1.0):
            raise UsageError("box trimming needs 0 <= phi < 1")
        if self.mode == "quantile" and not (0.0 <= self.lo < self.hi <= 1.0):
            raise UsageError("quantile trimming needs 0 <= lo < hi <= 1")


def trimming_mask(dataset: Dataset, spec: TrimmingSpec) -> np.ndarray:
    """0/1 weights selecting the observations kept by ``spec``."""
    n = dataset.n
    if spec.mode == "none":
        return np.ones(n)
    xe = dataset.xe
    if spec.mode == "box":
        keep = np.all(np.abs(xe) <= 1.0 - spec.phi, axis=1)
    else:
        lo = np.quantile(xe, spec.lo, axis=0)
        hi = np.quantile(xe, spec.hi, axis=0)
        keep = np.all((xe >= lo) & (xe <= hi), axis=1)
    return keep.astype(np.float64)
