"""Finite metric measure spaces, Hajlasz gradients and the embedding / mass-bound equivalences."""

from .constructions import bump, construction1, construction2, verify_halfmass
from .corpus import cantor, expected_exponent, grid, random_space, snowflake, vanishing_density
from .embeddings import InequalityCase, chaining_trace, estimate_constant, eval_inequality, exp_integral, holder_constant
from .errors import LabError
from .extraction import (
    IterationInstance,
    PipelineParams,
    extract_kappa,
    extract_relative_kappa,
    iteration_check,
    pipeline_verify,
)
from .geometry import (
    analyze,
    doubling_constant,
    fat_ball,
    lower_mass_constant,
    phi,
    relative_lower_bound,
    uniform_perfectness,
    v_condition,
)
from .hajlasz import best_constant_shift, is_generalized_gradient, m_norm, minimal_gradient
from .mmspace import Ball, MetricMeasureSpace, PointSet, load_space, save_space, validate_space

__version__ = "0.1.0"

__all__ = [
    "Ball", "InequalityCase", "IterationInstance", "LabError", "MetricMeasureSpace", "PipelineParams", "PointSet",
    "analyze", "best_constant_shift", "bump", "cantor", "chaining_trace", "construction1", "construction2",
    "doubling_constant", "estimate_constant", "eval_inequality", "exp_integral", "expected_exponent",
    "extract_kappa", "extract_relative_kappa", "fat_ball", "grid", "holder_constant", "is_generalized_gradient",
    "iteration_check", "load_space", "lower_mass_constant", "m_norm", "minimal_gradient", "phi",
    "pipeline_verify", "random_space", "relative_lower_bound", "save_space", "snowflake", "uniform_perfectness",
    "v_condition", "validate_space", "vanishing_density", "verify_halfmass",
]
