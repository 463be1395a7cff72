"""Semiparametric estimation of binary monotone index models by kernel gradient descent."""

from .engines import (
    AveragedEstimate,
    GDConfig,
    IterationState,
    StopRule,
    SubsampleDraw,
    bgd_step_known_g,
    check_stop,
    draw_subsample,
    init_state,
    kbgd_step,
    kmbgd_step,
    run_akmbgd,
)
from .errors import (
    DegenerateDataError,
    DivergenceError,
    InferenceError,
    InitializationError,
    MindexError,
    NormalizationError,
    NumericalError,
    ParseError,
    SchemaError,
    UsageError,
)
from .inference import (
    CDFCurve,
    CovarianceEstimate,
    InferenceConfig,
    confidence_intervals,
    covariance,
    estimate_cdf_curve,
    estimate_lambda,
    estimate_sigma_xi,
    known_link_covariance,
)
from .kernels import BandwidthRule, KernelSpec, bandwidth, kernel_deriv, kernel_eval, make_kernel, verify_moments
from .logit import fit_logit, logit_init
from .model import Dataset, IndexValues, TrimmingSpec, compute_index, trimming_mask
from .nw import (
    TruncationFloor,
    fast_window_eval,
    naive_eval,
    nw_conditional_mean,
    nw_deriv,
    nw_full,
    nw_subsample_truncated,
    resolve_floor,
)
from .simulation import DGPSpec, MCReport, generate_dataset, run_bench, run_monte_carlo

__version__ = "0.1.0"
