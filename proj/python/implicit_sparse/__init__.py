"""Sparse regression by gradient descent on w = u*u - v*v."""

from ._core import (
    CapacityError,
    ConfigError,
    DimensionError,
    DivergenceError,
    IoError,
    ParameterError,
    SingularityError,
    estimate_wmax,
    generate_design,
    lasso,
    lemma_suite,
    oracle_ls,
    phase_transition_threshold,
    run_alg1,
    run_alg2,
    run_sweep,
    soft_threshold,
)

__all__ = [
    "CapacityError",
    "ConfigError",
    "DimensionError",
    "DivergenceError",
    "IoError",
    "ParameterError",
    "SingularityError",
    "estimate_wmax",
    "generate_design",
    "lasso",
    "lemma_suite",
    "oracle_ls",
    "phase_transition_threshold",
    "run_alg1",
    "run_alg2",
    "run_sweep",
    "soft_threshold",
]
