"""Logarithmic barrier for the nonnegative orthant.

The barrier is ``B(theta) = -sum(log(theta_i))``. Its Hessian is diagonal, so
every local-norm computation here works on the vector ``1 / theta**2`` and
never builds a dense matrix.

Other cones (semidefinite, second-order) would plug in by providing the same
five functions: value, gradient, Hessian diagonal, local norm, dual norm.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class BarrierDomainError(ValueError):
    """Raised when a point is not strictly inside the orthant."""


def _interior(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1:
        raise ValueError("theta must be a 1-D vector")
    if not np.all(theta > 0):
        raise BarrierDomainError(f"nonpositive coordinate (min={theta.min()!r})")
    return theta


@dataclass(frozen=True)
class BarrierPoint:
    """A point of the orthant interior with its barrier data attached."""

    theta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta", _interior(self.theta))

    @property
    def value(self) -> float:
        return barrier_value(self.theta)

    @property
    def grad(self) -> np.ndarray:
        return barrier_grad(self.theta)

    @property
    def metric(self) -> "LocalMetric":
        return barrier_hess(self.theta)

    @property
    def degree(self) -> int:
        # B(tau*theta) = B(theta) - n*log(tau)
        return self.theta.size


@dataclass(frozen=True)
class LocalMetric:
    """Diagonal of the barrier Hessian, ``1 / theta**2``."""

    diag_hess: np.ndarray

    @property
    def inv_sqrt(self) -> np.ndarray:
        """Diagonal of ``H^{-1/2}``, which is just ``theta``."""
        return 1.0 / np.sqrt(self.diag_hess)

    def as_matrix(self) -> np.ndarray:
        return np.diag(self.diag_hess)


def barrier_value(theta) -> float:
    theta = _interior(theta)
    return float(-np.sum(np.log(theta)))


def barrier_grad(theta) -> np.ndarray:
    theta = _interior(theta)
    return -1.0 / theta


def barrier_hess(theta) -> LocalMetric:
    theta = _interior(theta)
    return LocalMetric(1.0 / theta**2)


def _check_dims(theta, v):
    v = np.asarray(v, dtype=float)
    if v.shape != theta.shape:
        raise ValueError(f"dimension mismatch: theta {theta.shape} vs v {v.shape}")
    return v


def local_norm(theta, v) -> float:
    """``||v||_theta = sqrt(sum(v_i**2 / theta_i**2))``."""
    theta = _interior(theta)
    v = _check_dims(theta, v)
    return float(np.linalg.norm(v / theta))


def dual_local_norm(theta, v) -> float:
    """``||v||*_theta = sqrt(sum(v_i**2 * theta_i**2))``."""
    theta = _interior(theta)
    v = _check_dims(theta, v)
    return float(np.linalg.norm(v * theta))


def local_matrix_norm(theta, C, *, sym_tol: float = 1e-10) -> float:
    """Operator norm of ``C`` from the local norm to the dual local norm.

    Equals the spectral norm of ``diag(theta) C diag(theta)``.
    """
    theta = _interior(theta)
    C = np.asarray(C, dtype=float)
    if C.shape != (theta.size, theta.size):
        raise ValueError(f"C must be {theta.size}x{theta.size}, got {C.shape}")
    scale = max(1.0, float(np.max(np.abs(C))) if C.size else 1.0)
    if np.max(np.abs(C - C.T), initial=0.0) > sym_tol * scale:
        raise ValueError("C is not symmetric")
    S = theta[:, None] * C * theta[None, :]
    S = 0.5 * (S + S.T)
    if S.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvalsh(S))))


def dikin_contains(theta0, theta, radius: float) -> bool:
    """True iff ``theta`` lies in the Dikin ellipsoid of the given radius at ``theta0``."""
    theta0 = _interior(theta0)
    theta = _check_dims(theta0, theta)
    return local_norm(theta0, theta - theta0) <= radius
