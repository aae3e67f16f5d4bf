"""Conic programs ``min L(theta) s.t. A theta = b, theta >= 0``.

Includes the reduction of box constraints ``l <= x <= u`` to the orthant,
orthonormal null-space bases of ``A`` and construction of strictly interior
feasible starting points.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class ContractError(ValueError):
    """Inputs violate a documented precondition."""


class FullyDeterminedError(ContractError):
    """``A`` has full column rank, so the feasible set is at most a point."""


class InfeasibleError(RuntimeError):
    """No strictly interior feasible point could be found."""


@dataclass(frozen=True)
class ObjectiveOracle:
    """Value, gradient and Hessian callables for a smooth objective.

    ``full`` optionally returns ``(value, gradient, hessian)`` in one pass; it
    is used by :meth:`derivatives` when present.
    """

    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]
    full: Optional[Callable[[np.ndarray], tuple]] = None

    def derivatives(self, theta):
        if self.full is not None:
            v, g, H = self.full(theta)
        else:
            v, g, H = self.value(theta), self.gradient(theta), self.hessian(theta)
        return float(v), np.asarray(g, dtype=float), np.asarray(H, dtype=float)

    @classmethod
    def from_full(cls, full, value=None):
        """Build an oracle out of a single ``theta -> (value, grad, hess)`` function."""
        if value is None:
            value = lambda th: full(th)[0]  # noqa: E731
        return cls(
            value=value,
            gradient=lambda th: full(th)[1],
            hessian=lambda th: full(th)[2],
            full=full,
        )


@dataclass(frozen=True)
class BoxProvenance:
    """Affine map between original box variables ``x`` and cone coordinates.

    The first ``n_orig`` cone coordinates are ``sign * (x - offset)``; then one
    slack per variable with both bounds finite, ``u - x``.
    """

    offset: np.ndarray
    sign: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    slack_vars: np.ndarray  # indices of original variables owning a slack
    names: tuple = ()

    @property
    def n_orig(self) -> int:
        return self.offset.size

    @property
    def n_cone(self) -> int:
        return self.offset.size + self.slack_vars.size

    def to_original(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return self.offset + self.sign * theta[..., : self.n_orig]

    def to_cone(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        head = self.sign * (x - self.offset)
        slack = self.upper[self.slack_vars] - x[..., self.slack_vars]
        return np.concatenate([head, slack], axis=-1)


@dataclass(frozen=True)
class ConicProgram:
    oracle: ObjectiveOracle
    A: np.ndarray
    b: np.ndarray
    provenance: Optional[BoxProvenance] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if A.shape[0] != b.size:
            raise ContractError(f"A has {A.shape[0]} rows but b has {b.size} entries")
        if not np.all(np.isfinite(A)) or not np.all(np.isfinite(b)):
            raise ContractError("A and b must be finite")
        if A.shape[0] > A.shape[1]:
            raise ContractError("more equality rows than variables")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def tolerance(self) -> float:
        """Equality-residual tolerance used throughout: ``1e-8 * (1 + ||b||)``."""
        return 1e-8 * (1.0 + float(np.linalg.norm(self.b)))

    def is_interior(self, theta) -> bool:
        res, mn = residuals(self, theta)
        return mn > 0 and res <= self.tolerance()


def unconstrained(oracle: ObjectiveOracle, n: int, **meta) -> ConicProgram:
    """Program over the orthant with no equality constraints."""
    return ConicProgram(oracle, np.zeros((0, n)), np.zeros(0), meta=meta)


def from_box_constrained(oracle, A, b, l, u, names=()) -> ConicProgram:
    """Rewrite ``min f(x) s.t. A x = b, l <= x <= u`` over the orthant.

    A variable with finite ``l`` and ``u`` becomes the pair ``x - l``, ``u - x``
    tied by ``(x - l) + (u - x) = u - l``. A variable with one infinite bound
    becomes a single shifted coordinate. Free variables are rejected.
    """
    l = np.asarray(l, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    N = l.size
    if u.size != N:
        raise ContractError("l and u differ in length")
    if np.any(l >= u):
        raise ContractError("every lower bound must be strictly below its upper bound")
    if np.any(np.isinf(l) & np.isinf(u)):
        raise ContractError("free variables cannot be mapped onto the orthant")
    if np.any(np.isposinf(l)) or np.any(np.isneginf(u)):
        raise ContractError("invalid infinite bound")

    lower_finite = np.isfinite(l)
    sign = np.where(lower_finite, 1.0, -1.0)
    offset = np.where(lower_finite, l, u)
    slack_vars = np.flatnonzero(lower_finite & np.isfinite(u))
    prov = BoxProvenance(offset, sign, l, u, slack_vars, tuple(names))
    n = prov.n_cone

    A0 = np.zeros((0, N)) if A is None else np.atleast_2d(np.asarray(A, dtype=float))
    b0 = np.zeros(0) if b is None else np.asarray(b, dtype=float).reshape(-1)
    if A0.size and A0.shape[1] != N:
        raise ContractError("A column count does not match the bounds")
    A0 = A0.reshape(-1, N)
    rows = [np.hstack([A0 * sign, np.zeros((A0.shape[0], slack_vars.size))])]
    rhs = [b0 - A0 @ offset]
    pair = np.zeros((slack_vars.size, n))
    pair[np.arange(slack_vars.size), slack_vars] = 1.0
    pair[np.arange(slack_vars.size), N + np.arange(slack_vars.size)] = 1.0
    rows.append(pair)
    rhs.append(u[slack_vars] - l[slack_vars])

    def full(theta):
        x = prov.to_original(theta)
        v, g, H = oracle.derivatives(x)
        gc = np.zeros(n)
        gc[:N] = sign * g
        Hc = np.zeros((n, n))
        Hc[:N, :N] = sign[:, None] * H * sign[None, :]
        return v, gc, Hc

    def value(theta):
        return float(oracle.value(prov.to_original(theta)))

    pulled = ObjectiveOracle.from_full(full, value=value)
    return ConicProgram(pulled, np.vstack(rows), np.concatenate(rhs), provenance=prov)


@dataclass(frozen=True)
class NullBasis:
    T: np.ndarray

    @property
    def k(self) -> int:
        return self.T.shape[1]


def null_space_basis(A, n: Optional[int] = None) -> NullBasis:
    """Orthonormal basis of ``{d : A d = 0}`` from an SVD with rank tolerance ``1e-10 * ||A||``."""
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[None, :] if A.size else A.reshape(0, n or 0)
    n = A.shape[1]
    if A.shape[0] == 0:
        return NullBasis(np.eye(n))
    _, s, Vt = np.linalg.svd(A, full_matrices=True)
    rank = int(np.sum(s > 1e-10 * s[0])) if s.size and s[0] > 0 else 0
    if rank >= n:
        raise FullyDeterminedError("fully determined feasible set: A has trivial null space")
    return NullBasis(np.ascontiguousarray(Vt[rank:].T))


def residuals(program: ConicProgram, theta):
    """``(||A theta - b||, min(theta))``."""
    theta = np.asarray(theta, dtype=float)
    r = program.A @ theta - program.b if program.A.shape[0] else np.zeros(0)
    return float(np.linalg.norm(r)), float(np.min(theta))


def project_affine(A, b, theta) -> np.ndarray:
    """Euclidean projection of ``theta`` onto ``{A theta = b}``."""
    if A.shape[0] == 0:
        return np.array(theta, dtype=float)
    r = A @ theta - b
    corr, *_ = np.linalg.lstsq(A, r, rcond=None)
    return theta - corr


def analytic_center(program: ConicProgram, theta=None, max_iter: int = 100):
    """Damped (infeasible-start) Newton on ``-sum(log theta)`` restricted to ``A theta = b``.

    Returns the last strictly interior feasible iterate. When the feasible set is
    unbounded the center does not exist, and iteration stops once the iterate is
    feasible and keeps drifting outward.
    """
    A, b, n = program.A, program.b, program.n
    m = A.shape[0]
    tol = program.tolerance()
    theta = np.ones(n) if theta is None else np.array(theta, dtype=float)
    best = None
    for _ in range(max_iter):
        if not (np.all(np.isfinite(theta)) and np.min(theta) > 1e-150):
            break  # collapsing onto the boundary: the affine set misses the interior
        g = -1.0 / theta
        hinv = theta**2
        r = A @ theta - b
        # KKT system [H A^T; A 0] [dx; w] = -[g; r], eliminated through H^{-1}
        if m:
            S = (A * hinv) @ A.T
            rhs = r - (A * hinv) @ g
            w = np.linalg.lstsq(S, rhs, rcond=None)[0]
            dx = -hinv * (g + A.T @ w)
        else:
            dx = -hinv * g
        feasible = np.linalg.norm(r) <= tol
        if feasible:
            best = theta.copy()
            lam2 = float(dx @ (dx / hinv))
            if lam2 < 1e-20 or np.max(theta) > 1e8 * (1.0 + np.max(np.abs(b), initial=0.0)):
                break
            t = 1.0 / (1.0 + np.sqrt(lam2))
        else:
            neg = dx < 0
            t = 1.0
            if np.any(neg):
                t = min(1.0, 0.99 * float(np.min(-theta[neg] / dx[neg])))
        theta = theta + t * dx
    if best is None and np.linalg.norm(A @ theta - b) <= tol and np.all(theta > 0):
        best = theta
    return best


def feasible_interior_point(program: ConicProgram, box_hint=None, rng=None, max_tries: int = 1000):
    """Strictly positive ``theta0`` with ``||A theta0 - b|| <= 1e-8 (1 + ||b||)``.

    With ``box_hint = (lo, hi)`` over cone coordinates, points are drawn uniformly
    from the hint and projected onto the affine set until one is interior.
    Without a hint the analytic center is used.
    """
    tol = program.tolerance()
    if box_hint is not None:
        rng = np.random.default_rng(rng)
        lo, hi = (np.asarray(h, dtype=float) for h in box_hint)
        for _ in range(max_tries):
            theta = project_affine(program.A, program.b, rng.uniform(lo, hi))
            theta = project_affine(program.A, program.b, theta)
            res, mn = residuals(program, theta)
            if mn > 0 and res <= tol:
                return theta
        raise InfeasibleError(f"no interior point found in {max_tries} attempts")
    theta = analytic_center(program)
    if theta is None:
        raise InfeasibleError("analytic-center Newton did not reach a strictly feasible point")
    return theta
