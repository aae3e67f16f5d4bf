"""Affine-scaling interior methods: cubic-regularized Newton and its first-order variant.

Each iteration reduces to the scaled null space at the current iterate, solves
the model over the Euclidean ball ``||s|| <= 1 - alpha`` and maps back. With
adaptive regularization a step is accepted only when it achieves the
sufficient-decrease inequality; otherwise ``M`` doubles and the step is
recomputed.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .problem import ConicProgram, ContractError, NullBasis, null_space_basis, residuals
from .subproblem import (
    ReducedModel,
    ScaledGeometry,
    scaled_geometry,
    solve_ball_constrained_cubic,
)

log = logging.getLogger(__name__)

TERMINATION_REASONS = (
    "step_norm_below_eta",
    "gradient_norm_below_epsilon",
    "step_euclidean_below_epsilon",
    "max_iterations",
    "regularization_limit",
)


@dataclass(frozen=True)
class SolverConfig:
    M0: float = 1.0
    alpha: float = 0.5
    eta: float = 1e-8
    epsilon: float = 1e-6
    max_iter: int = 500
    adaptive_M: bool = True
    M_min: float = 1e-6
    M_max: float = 1e12
    variant: str = "second_order"
    decrease_slack: float = 1e-12

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ContractError("alpha must lie in (0, 1)")
        if not 0 < self.eta <= 1 - self.alpha:
            raise ContractError("eta must lie in (0, 1 - alpha]")
        if not (0 < self.M_min <= self.M0 <= self.M_max):
            raise ContractError("need 0 < M_min <= M0 <= M_max")
        if self.epsilon <= 0 or self.max_iter < 1:
            raise ContractError("epsilon must be positive and max_iter >= 1")
        if self.variant not in ("second_order", "first_order"):
            raise ContractError(f"unknown variant {self.variant!r}")

    def with_(self, **kw) -> "SolverConfig":
        return replace(self, **kw)


@dataclass
class SolveReport:
    theta: np.ndarray
    best_theta: np.ndarray
    objective: float
    best_objective: float
    objectives: list
    step_norms: list
    M_history: list
    iterates: list
    decreases: list
    iterations: int
    best_iteration: int
    termination: str
    wall_time: float
    fosp: float
    sosp: float
    raw_grad_norm: float
    variant: str
    rejections: int = 0
    extra: dict = field(default_factory=dict)

    def sufficient_decrease_violations(self, tol: float = 1e-12) -> int:
        """Accepted steps violating ``dL >= (M/12)||s||^3`` (or ``(M/4)||s||^2``)."""
        bad = 0
        for dL, M, s in self.decreases:
            bound = M / 12.0 * s**3 if self.variant == "second_order" else M / 4.0 * s**2
            if dL < bound - tol:
                bad += 1
        return bad


def theorem_eta(epsilon: float, alpha: float, M: float) -> float:
    """Step threshold giving the iteration bound ``K <= 12 (L0 - L*) eta^-3 + 1``."""
    if epsilon <= 0 or M <= 0 or not 0 < alpha < 1:
        raise ValueError("need epsilon > 0, M > 0 and 0 < alpha < 1")
    return min(
        1.0 - alpha,
        np.sqrt(epsilon * alpha / M),
        np.sqrt(epsilon) * alpha**2 / (np.sqrt(2.0) * M),
    )


def iteration_bound(L0: float, L_star: float, eta: float) -> float:
    return 12.0 * (L0 - L_star) / eta**3 + 1.0


def check_stationarity(program: ConicProgram, theta, basis: Optional[NullBasis] = None, derivs=None):
    """``(fosp, sosp)``: scaled reduced gradient norm and smallest reduced-Hessian eigenvalue.

    ``fosp`` equals ``max |grad L . d|`` over ``A d = 0`` with ``||d||_theta = 1``.
    """
    theta = np.asarray(theta, dtype=float)
    basis = basis if basis is not None else null_space_basis(program.A, program.n)
    if derivs is None:
        _, grad, hess = program.oracle.derivatives(theta)
    else:
        _, grad, hess = derivs
    geo = scaled_geometry(theta, grad, hess, basis)
    return _measures(geo)


def _measures(geo: ScaledGeometry):
    fosp = float(np.linalg.norm(geo.g))
    sosp = float(np.linalg.eigvalsh(geo.P)[0]) if geo.P.size else 0.0
    return fosp, sosp


def is_fosp(fosp: float, epsilon: float) -> bool:
    return fosp <= epsilon


def is_sosp(fosp: float, sosp: float, epsilon: float) -> bool:
    return fosp <= epsilon and sosp >= -np.sqrt(epsilon)


def foas_step(g, M: float, rho: float) -> np.ndarray:
    """Closed-form minimizer of ``g^T s + (M/2)||s||^2`` over ``||s|| <= rho``."""
    gn = float(np.linalg.norm(g))
    if gn == 0.0:
        return np.zeros_like(g)
    return -min(gn / M, rho) * g / gn


def _solve(program: ConicProgram, theta0, config: SolverConfig) -> SolveReport:
    theta = np.array(theta0, dtype=float)
    if theta.shape != (program.n,):
        raise ContractError(f"theta0 must have shape ({program.n},)")
    res, mn = residuals(program, theta)
    if not (mn > 0 and res <= program.tolerance()):
        raise ContractError(f"theta0 is not interior feasible (residual={res:.3e}, min={mn:.3e})")

    t_start = time.perf_counter()
    second = config.variant == "second_order"
    rho = 1.0 - config.alpha
    basis = null_space_basis(program.A, program.n)
    oracle = program.oracle

    f, grad, hess = oracle.derivatives(theta)
    geo = scaled_geometry(theta, grad, hess, basis)
    M = config.M0

    objectives = [f]
    iterates = [theta.copy()]
    step_norms, M_hist, decreases = [], [M], []
    best_f, best_theta, best_it = f, theta.copy(), 0
    reason = "max_iterations"
    rejections = 0
    it = 0

    while it < config.max_iter:
        while True:
            if second:
                s, _ = solve_ball_constrained_cubic(ReducedModel(geo.g, geo.P, M, rho, theta, geo.step_map))
            else:
                s = foas_step(geo.g, M, rho)
            snorm = float(np.linalg.norm(s))
            theta_new = theta + geo.step_map @ s
            halvings = 0
            while np.min(theta_new) <= 0:
                # only reachable through rounding when a coordinate is tiny
                halvings += 1
                if halvings > 60:
                    s, snorm, theta_new = np.zeros_like(s), 0.0, theta.copy()
                    break
                s *= 0.5
                snorm *= 0.5
                theta_new = theta + geo.step_map @ s
            f_new = float(oracle.value(theta_new))
            if not config.adaptive_M:
                break
            bound = M / 12.0 * snorm**3 if second else M / 4.0 * snorm**2
            # the slack absorbs rounding in the bound, never an increase in L
            if np.isfinite(f_new) and f_new <= f and f - f_new >= bound - config.decrease_slack:
                break
            rejections += 1
            if np.linalg.norm(theta_new - theta) < config.epsilon:
                reason = "step_euclidean_below_epsilon"
                break
            M *= 2.0
            if M > config.M_max:
                reason = "regularization_limit"
                break
        if reason in ("step_euclidean_below_epsilon", "regularization_limit"):
            break

        it += 1
        dx = float(np.linalg.norm(theta_new - theta))
        decreases.append((f - f_new, M, snorm))
        theta = theta_new
        f, grad, hess = oracle.derivatives(theta)
        geo = scaled_geometry(theta, grad, hess, basis)
        objectives.append(f)
        iterates.append(theta.copy())
        step_norms.append(snorm)
        if f < best_f:
            best_f, best_theta, best_it = f, theta.copy(), it
        if config.adaptive_M:
            M = max(0.5 * M, config.M_min)
        M_hist.append(M)

        if snorm < config.eta:
            reason = "step_norm_below_eta"
            break
        if np.linalg.norm(geo.g) < config.epsilon:
            reason = "gradient_norm_below_epsilon"
            break
        if dx < config.epsilon:
            reason = "step_euclidean_below_epsilon"
            break

    wall = time.perf_counter() - t_start
    fosp, sosp = _measures(geo)
    raw = float(np.linalg.norm(grad))
    log.debug("%s stop after %d iterations: %s (f=%.6g)", config.variant, it, reason, f)
    return SolveReport(
        theta=theta,
        best_theta=best_theta,
        objective=f,
        best_objective=best_f,
        objectives=objectives,
        step_norms=step_norms,
        M_history=M_hist,
        iterates=iterates,
        decreases=decreases,
        iterations=it,
        best_iteration=best_it,
        termination=reason,
        wall_time=wall,
        fosp=fosp,
        sosp=sosp,
        raw_grad_norm=raw,
        variant=config.variant,
        rejections=rejections,
    )


def crnas_solve(program: ConicProgram, theta0, config: Optional[SolverConfig] = None) -> SolveReport:
    """Cubic-regularized Newton with affine scaling from an interior feasible ``theta0``."""
    config = config or SolverConfig()
    if config.variant != "second_order":
        config = config.with_(variant="second_order")
    return _solve(program, theta0, config)


def foas_solve(program: ConicProgram, theta0, config: Optional[SolverConfig] = None) -> SolveReport:
    """First-order affine scaling: quadratic model ``g^T s + (M/2)||s||^2`` on the Dikin ball."""
    config = config or SolverConfig()
    if config.variant != "first_order":
        config = config.with_(variant="first_order")
    return _solve(program, theta0, config)


SOLVERS = {"crnas": crnas_solve, "foas": foas_solve}
