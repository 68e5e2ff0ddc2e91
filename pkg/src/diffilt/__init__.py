"""Differentiable image-processing filters with exact parameter
gradients, a gradient-descent fitting engine, and an experiment harness.
"""

from .classical import (
    DefogContext,
    contrast_filter,
    default_defog_context,
    defog_filter,
    estimate_atmospheric_light,
    gamma_filter,
    sharpen_filter,
    tone_filter,
    white_balance,
)
from .fit import AdamState, FitConfig, FitTrace, adam_step, combined_loss, fit_filter
from .grad import (
    FILTER_NAMES,
    FilterChain,
    GradReport,
    ParamFilter,
    filter_registry,
    finite_diff_check,
    make_filter,
    param_jvp,
    param_vjp,
)
from .harness import (
    AugmentSpec,
    ExperimentRow,
    bpw_augment,
    degrade,
    make_preset,
    mimicry_experiment,
    sample_params,
)
from .image import (
    convolve2d,
    gaussian_kernel,
    load_image,
    luminance,
    save_image,
)
from .metrics import mse, psnr, ssim
from .unified import bezier_point, bpw_control_points, bpw_filter, kbl_filter

__version__ = "0.1.0"

__all__ = [
    "AdamState", "AugmentSpec", "DefogContext", "ExperimentRow", "FILTER_NAMES",
    "FilterChain", "FitConfig", "FitTrace", "GradReport", "ParamFilter",
    "adam_step", "bezier_point", "bpw_augment", "bpw_control_points", "bpw_filter",
    "combined_loss", "contrast_filter", "convolve2d", "default_defog_context",
    "defog_filter", "degrade", "estimate_atmospheric_light", "filter_registry",
    "finite_diff_check", "fit_filter", "gamma_filter", "gaussian_kernel",
    "kbl_filter", "load_image", "luminance", "make_filter", "make_preset",
    "mimicry_experiment", "mse", "param_jvp", "param_vjp", "psnr", "sample_params",
    "save_image", "sharpen_filter", "ssim", "tone_filter", "white_balance",
]
