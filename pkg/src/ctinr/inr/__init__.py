"""Coordinate networks: configs, parameter layout, evaluation, gradients."""

from .configs import (
    ARCHITECTURES,
    HASH_PRIMES,
    HashConfig,
    ReluFourierConfig,
    SirenConfig,
    config_from_dict,
    fourier_frequencies,
)
from .evaluator import (
    FeatureMatrix,
    GridEvaluator,
    backprop_grid,
    evaluate_grid,
    feature_matrix,
)
from .model import INRModel, build_layout, init_inr

__all__ = [
    "ARCHITECTURES",
    "HASH_PRIMES",
    "HashConfig",
    "ReluFourierConfig",
    "SirenConfig",
    "config_from_dict",
    "fourier_frequencies",
    "FeatureMatrix",
    "GridEvaluator",
    "backprop_grid",
    "evaluate_grid",
    "feature_matrix",
    "INRModel",
    "build_layout",
    "init_inr",
]
