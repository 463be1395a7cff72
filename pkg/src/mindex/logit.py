"""Parametric logit fit used as the starting value of the kernel iterations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit

from .errors import InitializationError, NormalizationError
from .model import Dataset

__all__ = ["LogitFit", "fit_logit", "logit_init"]

SEPARATION_LOSS = 1e-4


@dataclass(frozen=True)
class LogitFit:
    """Logit MLE on ``[1, x0, x]``.

    ``coef[0]`` is the intercept, ``coef[1]`` the coefficient on ``x0`` and
    ``coef[2:]`` the free covariates. ``cov`` is the inverse observed
    information.
    """

    coef: np.ndarray
    cov: np.ndarray
    loglik: float
    n_iter: int
    grad_norm: float

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.diag(self.cov))


def _loglik(X, y, w):
    eta = X @ w
    return float(np.sum(y * log_expit(eta) + (1.0 - y) * log_expit(-eta)))


def fit_logit(dataset: Dataset, tol: float = 1e-8, max_iter: int = 100, max_norm: float = 1e3) -> LogitFit:
    """Damped Newton iterations until the mean score has norm ``<= tol``.

    Raises :class:`InitializationError` when the outcome is constant or the
    coefficients run off to infinity (separation).
    """
    y = dataset.y
    if y.min() == y.max():
        raise InitializationError("outcome has no variation; logit start is undefined")
    n = dataset.n
    X = np.column_stack([np.ones(n), dataset.x0, dataset.x])
    w = np.zeros(X.shape[1])
    ll = _loglik(X, y, w)
    gnorm = np.inf
    for it in range(1, max_iter + 1):
        mu = expit(X @ w)
        grad = X.T @ (y - mu) / n
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= tol:
            break
        H = (X * (mu * (1.0 - mu))[:, None]).T @ X / n
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError as exc:
            raise InitializationError(
                "logit information matrix is singular; supply a starting value"
            ) from exc
        t = 1.0
        while True:
            cand = w + t * step
            ll_new = _loglik(X, y, cand)
            if ll_new >= ll or t < 1e-10:
                break
            t *= 0.5
        w, ll = cand, ll_new
        if not np.all(np.isfinite(w)) or np.linalg.norm(w) > max_norm:
            break
    else:
        it = max_iter
    # a mean log loss this small means the classes are (quasi-)separated
    if not np.all(np.isfinite(w)) or np.linalg.norm(w) > max_norm or ll > -SEPARATION_LOSS * n:
        raise InitializationError(
            "logit coefficients diverge (likely perfect separation); supply a starting value"
        )
    mu = expit(X @ w)
    H = (X * (mu * (1.0 - mu))[:, None]).T @ X
    cov = np.linalg.inv(H)
    return LogitFit(coef=w, cov=cov, loglik=ll, n_iter=it, grad_norm=gnorm)


def logit_init(dataset: Dataset, **kwargs) -> np.ndarray:
    """Free coefficients of the logit fit divided by the coefficient on ``x0``."""
    fit = fit_logit(dataset, **kwargs)
    b0 = fit.coef[1]
    if not b0 > 1e-8:
        raise NormalizationError(
            f"fitted coefficient on the normalized covariate is {b0:.3g}; it must be "
            "strictly positive (flip its sign or choose another covariate)"
        )
    return fit.coef[2:] / b0
