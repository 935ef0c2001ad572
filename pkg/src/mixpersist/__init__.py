"""Persistence exponents of self-similar Gaussian processes and their mixtures."""

from .persistence import (
    GridPolicy,
    PersistenceQuery,
    estimate_persistence,
    fit_exponent,
    grid_extrapolated_exponent,
    paired_exponent_gap,
)
from .processes import ProcessSpec, TimeGrid
from .sampling import SeedPolicy, experiment_key, sample_process

__all__ = [
    "GridPolicy",
    "PersistenceQuery",
    "ProcessSpec",
    "SeedPolicy",
    "TimeGrid",
    "estimate_persistence",
    "experiment_key",
    "fit_exponent",
    "grid_extrapolated_exponent",
    "paired_exponent_gap",
    "sample_process",
]

__version__ = "0.1.0"
