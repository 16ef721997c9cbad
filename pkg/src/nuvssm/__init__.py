"""Exact Gaussian inference in linear state space models with sparsity by
unknown-variance (NUV) priors: jump, slope-change and outlier estimation in
scalar signals, plus the closed-form dictionary-model machinery."""

from .gaussian import DualMarginal, GaussianInfo, GaussianMoment, Marginal
from .ssm import (
    NuvOverrides,
    SmoothingResult,
    StateSpaceModel,
    bifm_smooth,
    dense_joint_solve,
    mbf_smooth,
)
from .nuv import NuvConfig, NuvState, em_update, mackay_update, ml_update, run_nuv
from .batch import (
    DictionaryModel,
    StationarityReport,
    backward_message_moments,
    check_stationarity,
    posterior_moments,
    solve_map,
    wtilde_recursive,
)
from .models import (
    Event,
    FitResult,
    Segment,
    Simulation,
    build_line_model,
    build_oscillator_model,
    build_outlier_model,
    build_poly_model,
    build_step_model,
    build_walk_model,
    extract_events,
    fit,
    oscillator_matrix,
    simulate_lines,
    simulate_outliers,
    simulate_steps,
    simulate_walk,
)
from .kernels import COMPILED

__version__ = "0.1.0"

__all__ = [
    "GaussianMoment", "GaussianInfo", "Marginal", "DualMarginal",
    "StateSpaceModel", "NuvOverrides", "SmoothingResult",
    "mbf_smooth", "bifm_smooth", "dense_joint_solve",
    "NuvConfig", "NuvState", "run_nuv", "em_update", "mackay_update", "ml_update",
    "DictionaryModel", "StationarityReport", "solve_map", "wtilde_recursive",
    "posterior_moments", "backward_message_moments", "check_stationarity",
    "Event", "Segment", "FitResult",
    "build_step_model", "build_walk_model", "build_line_model",
    "build_poly_model", "build_outlier_model", "build_oscillator_model",
    "extract_events", "fit", "oscillator_matrix",
    "Simulation", "simulate_steps", "simulate_walk", "simulate_lines",
    "simulate_outliers",
    "COMPILED",
]
