"""Simulation and limit-law verification for Lambda-coalescent trees."""

__version__ = "0.1.0"

from .errors import ArgumentError, CoalscopeError, NumericError, UnsupportedFamilyError
from .measures import CoalescentMeasure, Family
from .chain import sample_jump_chain, simulate, tree_statistics, watterson_estimate
from .limits import Scenario, sample_limit, centering_scaling

__all__ = [
    "__version__",
    "ArgumentError",
    "CoalscopeError",
    "NumericError",
    "UnsupportedFamilyError",
    "CoalescentMeasure",
    "Family",
    "sample_jump_chain",
    "simulate",
    "tree_statistics",
    "watterson_estimate",
    "Scenario",
    "sample_limit",
    "centering_scaling",
]
