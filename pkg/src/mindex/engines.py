"""Gradient-descent engines for the monotone index model.

Four update rules share one state object:

* ``bgd_step_known_g``: batch step with a known link ``G`` (oracle);
* ``kbgd_step``: batch step with the full-sample NW estimate of ``G``;
* ``kmbgd_step``: mini-batch step on ``B`` indices drawn with replacement,
  with ``G`` re-estimated on the subsample and its density floored at ``c_f``;
* ``run_akmbgd``: KMBGD followed by averaging of the post-burn-in iterates,
  optionally with the moving-average stopping rule.

Iterate numbering: ``beta_1`` is the starting value, and update number
``k`` turns ``beta_k`` into ``beta_{k+1}``. ``IterationState.k`` counts the
updates performed so far.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from . import _kern
from .errors import DivergenceError, UsageError
from .kernels import BandwidthRule, KernelSpec, bandwidth, make_kernel
from .logit import logit_init
from .model import Dataset, TrimmingSpec, as_coefficients, index_array, trimming_mask
from .nw import TruncationFloor, ratio_at_data, resolve_floor

__all__ = [
    "StopRule",
    "GDConfig",
    "SubsampleDraw",
    "IterationState",
    "AveragedEstimate",
    "StepRecord",
    "init_state",
    "bgd_step_known_g",
    "kbgd_step",
    "kmbgd_step",
    "draw_subsample",
    "check_stop",
    "run_akmbgd",
    "full_gradient",
    "logit_init",
    "DIVERGENCE_NORM",
]

DIVERGENCE_NORM = 1e6


@dataclass(frozen=True)
class StopRule:
    """Moving-average stopping rule.

    Fires when the mean of the last ``window_T`` iterates and the mean of
    the ``window_T`` iterates ending ``gap`` steps earlier differ by less
    than ``rho`` in every coordinate.
    """

    window_T: int = 10000
    gap: int = 1000
    rho: float = 1e-3

    def __post_init__(self):
        if self.window_T < 1 or self.gap < 1:
            raise UsageError("stop rule needs window_T >= 1 and gap >= 1")
        if not self.rho > 0:
            raise UsageError("stop rule tolerance rho must be positive")

    @property
    def capacity(self) -> int:
        return self.window_T + self.gap


@dataclass(frozen=True)
class GDConfig:
    """Settings shared by the kernel engines.

    Parameters
    ----------
    delta : float
        Constant learning rate.
    trimming : TrimmingSpec
        Which observations enter the gradient.
    floor : TruncationFloor
        Lower bound for the subsample density estimate.
    B : int
        Subsample size of each mini-batch step.
    kernel : KernelSpec
        Kernel used for the link estimate (order 6 by default).
    bw_rule : BandwidthRule
    burn_in, follow_T : int
        Iterations discarded before averaging, and iterations averaged.
    stop : StopRule, optional
        When set, runs until the rule fires instead of ``burn_in + follow_T``.
    max_iters : int
        Hard cap on updates when a stop rule is active.
    seed : int
        Seed of the subsample stream.
    method : {"fast", "naive"}
        Kernel-sum evaluation path.
    """

    delta: float = 1.0
    trimming: TrimmingSpec = field(default_factory=TrimmingSpec)
    floor: TruncationFloor = field(default_factory=TruncationFloor)
    B: int = 1000
    kernel: KernelSpec = field(default_factory=lambda: make_kernel(6))
    bw_rule: BandwidthRule = field(default_factory=BandwidthRule)
    burn_in: int = 2000
    follow_T: int = 3000
    stop: StopRule | None = None
    max_iters: int = 200000
    seed: int = 0
    method: Literal["fast", "naive"] = "fast"

    def __post_init__(self):
        if not self.delta > 0:
            raise UsageError("learning rate delta must be positive")
        if self.B < 1:
            raise UsageError("subsample size B must be at least 1")
        if self.burn_in < 0:
            raise UsageError("burn_in must be non-negative")
        if self.follow_T < 1:
            raise UsageError("follow_T must be at least 1")
        if self.max_iters < 1:
            raise UsageError("max_iters must be at least 1")
        if self.method not in ("fast", "naive"):
            raise UsageError(f"unknown method {self.method!r}")

    def replace(self, **changes) -> "GDConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def long_run(cls, **changes) -> "GDConfig":
        """Preset with the longer burn-in and averaging window used on real data."""
        base = dict(B=3000, burn_in=40000, follow_T=10000)
        base.update(changes)
        return cls(**base)


@dataclass(frozen=True)
class SubsampleDraw:
    indices: np.ndarray
    k: int


class _Ring:
    """Fixed-capacity buffer of the most recent iterates (oldest first on read)."""

    def __init__(self, capacity: int, p: int):
        self.buf = np.zeros((capacity, p))
        self.capacity = capacity
        self.size = 0
        self.head = 0  # next write slot

    def push(self, beta):
        self.buf[self.head] = beta
        self.head = (self.head + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def ordered(self) -> np.ndarray:
        if self.size < self.capacity:
            return self.buf[: self.size]
        return np.concatenate([self.buf[self.head :], self.buf[: self.head]])

    def __len__(self):
        return self.size


@dataclass
class IterationState:
    """Mutable, single-owner state of one run.

    ``xphi`` (trimmed covariates) and ``c_f`` (resolved truncation floor) are
    fixed for the run and cached here.
    """

    k: int
    beta: np.ndarray
    rng: np.random.Generator
    ring: _Ring
    avg_sum: np.ndarray
    avg_count: int
    burn_in: int
    cumulative_seconds: float = 0.0
    xphi: np.ndarray | None = None
    c_f: float | None = None
    h: float | None = None

    @property
    def avg(self) -> np.ndarray:
        if self.avg_count == 0:
            raise UsageError("no post-burn-in iterates accumulated yet")
        return self.avg_sum / self.avg_count


def init_state(
    dataset: Dataset,
    config: GDConfig | None = None,
    beta0=None,
    ring_capacity: int | None = None,
) -> IterationState:
    """State at ``k = 0`` holding ``beta_1 = beta0`` (logit start when omitted).

    Resolves the truncation floor at the starting index.
    """
    config = config or GDConfig()
    beta = logit_init(dataset) if beta0 is None else as_coefficients(beta0, dataset.p).copy()
    if ring_capacity is None:
        ring_capacity = config.stop.capacity if config.stop is not None else 1
    ring = _Ring(ring_capacity, dataset.p)
    ring.push(beta)
    mask = trimming_mask(dataset, config.trimming)
    xphi = np.ascontiguousarray(dataset.x * mask[:, None])
    z = index_array(dataset.x0, dataset.x, beta)
    h = bandwidth(config.bw_rule, z, dataset.n)
    c_f = resolve_floor(config.floor, z, h, config.kernel)
    return IterationState(
        k=0,
        beta=beta,
        rng=np.random.Generator(np.random.Philox(config.seed)),
        ring=ring,
        avg_sum=np.zeros(dataset.p),
        avg_count=0,
        burn_in=config.burn_in,
        xphi=xphi,
        c_f=c_f,
        h=h,
    )


def _advance(state: IterationState, beta_new: np.ndarray, seconds: float) -> IterationState:
    norm = float(np.linalg.norm(beta_new))
    if not np.isfinite(norm) or norm > DIVERGENCE_NORM:
        raise DivergenceError(state.k + 1, norm)
    state.k += 1
    state.beta = beta_new
    state.ring.push(beta_new)
    if state.k > state.burn_in:
        state.avg_sum += beta_new
        state.avg_count += 1
    state.cumulative_seconds += seconds
    return state


def full_gradient(residual, xphi) -> np.ndarray:
    """``sum_i residual_i * xphi_i`` in fixed row order."""
    return _kern.weighted_gradient(
        np.ascontiguousarray(residual, dtype=np.float64), np.ascontiguousarray(xphi, dtype=np.float64)
    )


def bgd_step_known_g(
    state: IterationState, dataset: Dataset, G: Callable, delta: float = 1.0
) -> IterationState:
    """``beta <- beta - (delta/n) sum_i (G(z_i) - y_i) x_i`` with a known link ``G``.

    Uses the untrimmed covariates.
    """
    t0 = time.perf_counter()
    z = index_array(dataset.x0, dataset.x, state.beta)
    r = np.asarray(G(z), dtype=np.float64) - dataset.y
    g = full_gradient(r, dataset.x)
    beta_new = state.beta - (delta / dataset.n) * g
    return _advance(state, beta_new, time.perf_counter() - t0)


def _kernel_step(state, dataset, config, idx, floor):
    x0, x, y, xphi = dataset.x0, dataset.x, dataset.y, state.xphi
    if idx is not None:
        x0, x, y, xphi = x0[idx], x[idx], y[idx], xphi[idx]
    m = y.shape[0]
    z = index_array(x0, x, state.beta)
    h = bandwidth(config.bw_rule, z, dataset.n)
    state.h = h
    g_hat = ratio_at_data(z, y, h, config.kernel, floor=floor, method=config.method)
    g = full_gradient(g_hat - y, xphi)
    return state.beta - (config.delta / m) * g


def kbgd_step(state: IterationState, dataset: Dataset, config: GDConfig) -> IterationState:
    """Batch step with the full-sample NW link estimate at each ``z_i``."""
    t0 = time.perf_counter()
    beta_new = _kernel_step(state, dataset, config, None, None)
    return _advance(state, beta_new, time.perf_counter() - t0)


def draw_subsample(state: IterationState, n: int, B: int) -> SubsampleDraw:
    """``B`` uniform draws from ``range(n)`` with replacement, from the state's stream."""
    if n < 1 or not 1 <= B:
        raise UsageError(f"invalid subsample request n={n}, B={B}")
    idx = state.rng.integers(0, n, size=B)
    return SubsampleDraw(indices=idx, k=state.k + 1)


def kmbgd_step(
    state: IterationState, dataset: Dataset, config: GDConfig, indices=None
) -> IterationState:
    """Mini-batch step.

    The link is estimated on the subsample only (self-terms and duplicate
    draws included) with the denominator floored at ``state.c_f``; the
    gradient is scaled by ``delta / B``. ``indices`` overrides the random
    draw.
    """
    t0 = time.perf_counter()
    if indices is None:
        if config.B > dataset.n:
            raise UsageError(f"B={config.B} exceeds n={dataset.n}")
        idx = draw_subsample(state, dataset.n, config.B).indices
    else:
        idx = np.asarray(indices, dtype=np.int64)
        if idx.ndim != 1 or idx.shape[0] < 1 or idx.min() < 0 or idx.max() >= dataset.n:
            raise UsageError("subsample indices out of range")
    beta_new = _kernel_step(state, dataset, config, idx, state.c_f)
    return _advance(state, beta_new, time.perf_counter() - t0)


def check_stop(state: IterationState, stop: StopRule) -> bool:
    """Moving-average rule on the ring of recent iterates (infinity norm, strict ``<``).

    Inactive until the ring holds ``window_T + gap`` iterates.
    """
    ring = state.ring
    need = stop.window_T + stop.gap
    if len(ring) < need:
        return False
    it = ring.ordered()[-need:]
    recent = it[-stop.window_T :].mean(axis=0)
    earlier = it[: stop.window_T].mean(axis=0)
    return bool(np.max(np.abs(recent - earlier)) < stop.rho)


@dataclass(frozen=True)
class StepRecord:
    """One entry of the per-iteration trace stream."""

    k: int
    seconds: float
    beta: np.ndarray
    error: float | None = None


@dataclass
class AveragedEstimate:
    """Result of :func:`run_akmbgd`.

    ``beta_bar`` is the averaged estimate and ``beta_last`` the final raw
    iterate. ``trace`` (when recorded) holds ``beta_1 .. beta_{k+1}`` and
    ``seconds`` the matching cumulative wall time (0 for the start).
    """

    beta_bar: np.ndarray
    beta_last: np.ndarray
    beta_init: np.ndarray
    n_updates: int
    averaged: int
    stopped: bool | None
    warning: str | None
    c_f: float
    h_last: float | None
    seconds: float
    trace: np.ndarray | None = None
    trace_seconds: np.ndarray | None = None

    def diagnostics(self) -> dict:
        return {
            "n_updates": self.n_updates,
            "averaged_iterates": self.averaged,
            "stopped": self.stopped,
            "warning": self.warning,
            "c_f": self.c_f,
            "h_last": self.h_last,
            "seconds": self.seconds,
        }


def run_akmbgd(
    dataset: Dataset,
    config: GDConfig | None = None,
    beta0=None,
    record_trace: bool = False,
    truth=None,
    on_step: Callable[[StepRecord], None] | None = None,
) -> AveragedEstimate:
    """Averaged mini-batch kernel gradient descent.

    Without a stop rule, performs ``burn_in + follow_T`` updates and averages
    the ``follow_T`` iterates produced after the burn-in. With a stop rule,
    iterates until it fires (or ``max_iters``) and averages the last
    ``window_T + gap`` iterates; exhausting ``max_iters`` sets ``warning``.

    ``on_step`` receives a :class:`StepRecord` after every update, with the
    Euclidean error against ``truth`` when that is given.
    """
    config = config or GDConfig()
    state = init_state(dataset, config, beta0)
    beta_init = state.beta.copy()
    truth = None if truth is None else as_coefficients(truth, dataset.p)
    stop = config.stop
    total = config.burn_in + config.follow_T if stop is None else config.max_iters
    trace = [beta_init] if record_trace else None
    secs = [0.0] if record_trace else None
    stopped = None if stop is None else False
    for _ in range(total):
        kmbgd_step(state, dataset, config)
        if record_trace:
            trace.append(state.beta)
            secs.append(state.cumulative_seconds)
        if on_step is not None:
            err = None if truth is None else float(np.linalg.norm(state.beta - truth))
            on_step(StepRecord(state.k, state.cumulative_seconds, state.beta, err))
        if stop is not None and check_stop(state, stop):
            stopped = True
            break
    warning = None
    if stop is None:
        beta_bar = state.avg
        averaged = state.avg_count
    else:
        window = state.ring.ordered()
        beta_bar = window.mean(axis=0)
        averaged = window.shape[0]
        if not stopped:
            warning = f"stopping rule did not fire within {config.max_iters} updates"
    return AveragedEstimate(
        beta_bar=beta_bar,
        beta_last=state.beta.copy(),
        beta_init=beta_init,
        n_updates=state.k,
        averaged=averaged,
        stopped=stopped,
        warning=warning,
        c_f=state.c_f,
        h_last=state.h,
        seconds=state.cumulative_seconds,
        trace=np.array(trace) if record_trace else None,
        trace_seconds=np.array(secs) if record_trace else None,
    )
