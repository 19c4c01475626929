"""Monotone finite-difference schemes for Fokker-Planck type equations.

Second-order (Q1) and fourth-order (Q2) lumped-mass discretizations with
implicit Euler time stepping, plus tools to certify that the resulting
matrices are inverse-positive.
"""

from .assembly import SchemeOperator, assemble, build_rhs, ghost_map
from .errors import (
    ConfigurationError,
    ConvergenceError,
    EntropyDomainError,
    PositivityError,
    SingularMatrixError,
    StencilError,
)
from .grid import Grid, PointType, build_grid, quadrature_weights
from .krylov import SolveReport, dense_inverse, solve
from .monotonicity import (
    LorenzSplitting,
    MonotonicityReport,
    Verdict,
    certify,
    check_sufficient_conditions,
    lorenz_split,
    oracle_inverse_nonneg,
    verify_lorenz,
)
from .problem import Model, ProblemSpec, SampledFields, get_problem, load_table, sample
from .simulate import RunTrace, State, fit_decay_rate, phi_entropy, run, step

__version__ = "0.1.0"

__all__ = [
    "SchemeOperator", "assemble", "build_rhs", "ghost_map",
    "ConfigurationError", "ConvergenceError", "EntropyDomainError", "PositivityError",
    "SingularMatrixError", "StencilError",
    "Grid", "PointType", "build_grid", "quadrature_weights",
    "SolveReport", "dense_inverse", "solve",
    "LorenzSplitting", "MonotonicityReport", "Verdict", "certify", "check_sufficient_conditions",
    "lorenz_split", "oracle_inverse_nonneg", "verify_lorenz",
    "Model", "ProblemSpec", "SampledFields", "get_problem", "load_table", "sample",
    "RunTrace", "State", "fit_decay_rate", "phi_entropy", "run", "step",
]
