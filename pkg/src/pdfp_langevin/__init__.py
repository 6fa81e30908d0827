"""Langevin sampling of non-smooth log-concave posteriors with a K-step
primal-dual fixed-point (PDFP) approximation of the proximity operator."""

from .bounds import (
    HypothesisViolation,
    TheoryInputs,
    chi2_initial_bound,
    empirical_bound_check,
    expectation_bound,
    gradient_sum_bounds,
    kl_bound,
    moreau_strong_convexity,
    tv_bound,
)
from .diagnostics import DiagnosticsReport, ess, ess_summary, esjd, ks_distance, psnr
from .linalg import (
    LinearMap,
    ShapeError,
    make_convolution_map,
    make_dense_map,
    make_gradient_map,
    make_identity_map,
    power_iteration,
)
from .models import make_deblur_model, make_illposed_dense, make_toy, make_toy_1d, motion_blur_kernel, phantom
from .moreau import MoreauConfig, moreau_gradient, moreau_value, prox_energy
from .pdfp import (
    PdfpParams,
    PdfpState,
    contraction_rate_eta,
    kstep_prox_subproblem,
    pdfp_solve,
    pdfp_step,
)
from .pgm_io import read_pgm, write_pgm
from .problem import CompositeProblem, CompositeTarget
from .prox import L1Penalty, soft_threshold
from .samplers import SAMPLERS, ChainError, SamplerConfig, init_state, make_kernel, run_chain
from .tuning import tune_step_size, warm_start

__version__ = "0.1.0"

__all__ = [
    "HypothesisViolation",
    "TheoryInputs",
    "chi2_initial_bound",
    "empirical_bound_check",
    "expectation_bound",
    "gradient_sum_bounds",
    "kl_bound",
    "moreau_strong_convexity",
    "tv_bound",
    "DiagnosticsReport",
    "ess",
    "ess_summary",
    "esjd",
    "ks_distance",
    "psnr",
    "LinearMap",
    "ShapeError",
    "make_convolution_map",
    "make_dense_map",
    "make_gradient_map",
    "make_identity_map",
    "power_iteration",
    "make_deblur_model",
    "make_illposed_dense",
    "make_toy",
    "make_toy_1d",
    "motion_blur_kernel",
    "phantom",
    "MoreauConfig",
    "moreau_gradient",
    "moreau_value",
    "prox_energy",
    "PdfpParams",
    "PdfpState",
    "contraction_rate_eta",
    "kstep_prox_subproblem",
    "pdfp_solve",
    "pdfp_step",
    "read_pgm",
    "write_pgm",
    "CompositeProblem",
    "CompositeTarget",
    "L1Penalty",
    "soft_threshold",
    "SAMPLERS",
    "ChainError",
    "SamplerConfig",
    "init_state",
    "make_kernel",
    "run_chain",
    "tune_step_size",
    "warm_start",
]
