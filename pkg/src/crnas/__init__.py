"""Cubic-regularized Newton with affine scaling for conic-constrained parameter estimation."""

from .barrier import BarrierDomainError, dual_local_norm, local_matrix_norm, local_norm
from .problem import (
    ConicProgram,
    ContractError,
    FullyDeterminedError,
    InfeasibleError,
    ObjectiveOracle,
    from_box_constrained,
    null_space_basis,
    unconstrained,
)
from .solver import SolveReport, SolverConfig, check_stationarity, crnas_solve, foas_solve, theorem_eta
from .subproblem import ReducedModel, build_reduced_model, solve_ball_constrained_cubic

__version__ = "0.1.0"

__all__ = [
    "BarrierDomainError",
    "ConicProgram",
    "ContractError",
    "FullyDeterminedError",
    "InfeasibleError",
    "ObjectiveOracle",
    "ReducedModel",
    "SolveReport",
    "SolverConfig",
    "build_reduced_model",
    "check_stationarity",
    "crnas_solve",
    "dual_local_norm",
    "foas_solve",
    "from_box_constrained",
    "local_matrix_norm",
    "local_norm",
    "null_space_basis",
    "solve_ball_constrained_cubic",
    "theorem_eta",
    "unconstrained",
]
