"""Step computation in scaled null-space coordinates.

At an interior feasible ``theta`` with null-space basis ``T`` the step is
``theta + T R^{-1} s`` where ``R = (T^T diag(1/theta^2) T)^{1/2}``. In ``s`` the
Dikin constraint is the Euclidean ball ``||s|| <= 1 - alpha`` and the model is

    m(s) = g^T s + 0.5 s^T P s + (M / 6) ||s||^3.

Both the unconstrained cubic and the trust-region problem are solved exactly
through an eigendecomposition of ``P`` and a scalar secular equation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem import NullBasis

HARD_CASE_TOL = 1e-12


@dataclass(frozen=True)
class ScaledGeometry:
    """Reduced gradient/Hessian at a point, independent of ``M`` and ``alpha``."""

    theta: np.ndarray
    g: np.ndarray
    P: np.ndarray
    step_map: np.ndarray  # T R^{-1}, n x k


@dataclass(frozen=True)
class ReducedModel:
    g: np.ndarray
    P: np.ndarray
    M: float
    rho: float
    theta: np.ndarray
    step_map: np.ndarray

    def backmap(self, s) -> np.ndarray:
        return self.theta + self.step_map @ np.asarray(s, dtype=float)

    def value(self, s) -> float:
        return cubic_model(self.g, self.P, self.M, s)


@dataclass(frozen=True)
class SubproblemInfo:
    multiplier: float
    secular_residual: float
    kkt_residual: float
    hard_case: bool
    on_boundary: bool = False


def cubic_model(g, P, M, s) -> float:
    s = np.asarray(s, dtype=float)
    return float(g @ s + 0.5 * s @ P @ s + M / 6.0 * np.linalg.norm(s) ** 3)


def quadratic_model(g, P, s) -> float:
    s = np.asarray(s, dtype=float)
    return float(g @ s + 0.5 * s @ P @ s)


def scaled_geometry(theta, grad, hess, basis: NullBasis) -> ScaledGeometry:
    """Reduce ``grad``/``hess`` to the scaled null space at ``theta``.

    ``W = T^T diag(1/theta^2) T`` is factored by its symmetric square root. The
    eigenpairs of ``W`` come from an SVD of ``diag(1/theta) T`` so that badly
    scaled iterates do not square the condition number.
    """
    theta = np.asarray(theta, dtype=float)
    T = basis.T
    _, sig, Vt = np.linalg.svd(T / theta[:, None], full_matrices=False)
    if sig.size and not sig[-1] > 0:
        raise FloatingPointError("reduced barrier metric is not positive definite")
    Rinv = (Vt.T / sig) @ Vt
    step_map = T @ Rinv
    g = step_map.T @ grad
    P = step_map.T @ hess @ step_map
    return ScaledGeometry(theta, g, 0.5 * (P + P.T), step_map)


def build_reduced_model(theta, grad, hess, basis: NullBasis, M: float, alpha: float) -> ReducedModel:
    if not M > 0:
        raise ValueError("M must be positive")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    geo = scaled_geometry(theta, grad, hess, basis)
    return ReducedModel(geo.g, geo.P, float(M), 1.0 - alpha, geo.theta, geo.step_map)


def _eig(P):
    lam, V = np.linalg.eigh(0.5 * (P + P.T))
    return lam, V


def _spectral_split(lam, shift_floor):
    """Minimal eigenspace mask and gaps ``lam_i + shift_floor`` (exactly 0 on the mask)."""
    scale = max(1.0, float(np.max(np.abs(lam))))
    mask = lam <= lam[0] + 1e-12 * scale
    gaps = lam + shift_floor
    if shift_floor > 0:
        gaps = lam - lam[0]
        gaps[mask] = 0.0
    return mask, gaps


def _secular_root(f, fprime, lo, hi, rtol=1e-14, maxit=300):
    """Root of an increasing concave function on ``(lo, hi)``: Newton with bisection fallback."""
    x = hi
    for _ in range(maxit):
        fx = f(x)
        if fx == 0.0:
            return x
        if fx > 0:
            hi = x
        else:
            lo = x
        dfx = fprime(x)
        x_new = x - fx / dfx if dfx > 0 and np.isfinite(dfx) else 0.5 * (lo + hi)
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= rtol * abs(x_new) or hi - lo <= rtol * hi:
            return x_new
        x = x_new
    return x


def _newton_pair(gamma, gaps, target):
    """``h(delta) = 1/||gamma / (gaps + delta)|| - 1/target(delta)`` and its derivative.

    ``target`` returns ``(value, derivative)`` of the required step norm.
    """

    def h(delta):
        with np.errstate(over="ignore", divide="ignore"):
            nrm = np.linalg.norm(gamma / (gaps + delta))
        tv, _ = target(delta)
        return 1.0 / nrm - 1.0 / tv

    def hprime(delta):
        d = gaps + delta
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            nrm = np.linalg.norm(gamma / d)
            tv, td = target(delta)
            return np.sum(gamma**2 / d**3) / nrm**3 + td / tv**2

    return h, hprime


def solve_unconstrained_cubic(g, P, M: float):
    """Global minimizer of ``g^T s + 0.5 s^T P s + (M/6)||s||^3``.

    Returns ``(s, info)`` with ``info.multiplier = (M/2)||s||``. The minimizer
    is ``s = -(P + mu I)^{-1} g`` where ``mu = (M/2)||s|| >= max(0, -lambda_min)``;
    ``mu`` is found from the secular equation written in the shift
    ``delta = mu - max(0, -lambda_min)``.
    """
    g = np.asarray(g, dtype=float)
    P = np.asarray(P, dtype=float)
    k = g.size
    if k == 0:
        return np.zeros(0), SubproblemInfo(0.0, 0.0, 0.0, False)
    if not M > 0:
        raise ValueError("M must be positive")
    lam, V = _eig(P)
    gamma = V.T @ g
    gnorm = float(np.linalg.norm(g))
    mu_lo = max(0.0, -lam[0])
    minmask, gaps = _spectral_split(lam, mu_lo)
    r_lo = 2.0 * mu_lo / M
    degenerate = lam[0] <= 0 and bool(np.all(np.abs(gamma[minmask]) <= HARD_CASE_TOL * max(gnorm, 1e-300)))
    hard = False
    if gnorm == 0.0 and lam[0] >= 0:
        coef = np.zeros(k)
        mu = 0.0
    elif degenerate and np.linalg.norm(gamma[~minmask] / gaps[~minmask]) <= r_lo:
        # hard case: pad with a minimal eigenvector up to ||s|| = r_lo
        hard = True
        mu = mu_lo
        coef = np.zeros(k)
        coef[~minmask] = -gamma[~minmask] / gaps[~minmask]
        coef[np.flatnonzero(minmask)[0]] += np.sqrt(max(r_lo * r_lo - coef @ coef, 0.0))
    else:
        keep = ~minmask if degenerate else np.ones(k, dtype=bool)
        gam, gp = gamma[keep], gaps[keep]
        h, hprime = _newton_pair(gam, gp, lambda dl: (2.0 * (mu_lo + dl) / M, 2.0 / M))
        # ||s|| <= ||g|| / (lambda_min + mu) gives an upper bracket
        hi = max(0.5 * (-lam[0] + np.sqrt(lam[0] ** 2 + 2.0 * M * gnorm)) - mu_lo, 1e-300)
        while h(hi) < 0:
            hi *= 2.0
        delta = _secular_root(h, hprime, 0.0, hi)
        mu = mu_lo + delta
        coef = np.zeros(k)
        coef[keep] = -gam / (gp + delta)
    s = V @ coef
    r = float(np.linalg.norm(s))
    mult = 0.5 * M * r
    sec = abs(r - 2.0 * mu / M)
    kkt = float(np.linalg.norm(P @ s + mult * s + g))
    return s, SubproblemInfo(mult, sec, kkt, hard)


def solve_trust_region(g, P, rho: float):
    """Global minimizer of ``g^T s + 0.5 s^T P s`` over ``||s|| <= rho``."""
    g = np.asarray(g, dtype=float)
    P = np.asarray(P, dtype=float)
    k = g.size
    if not rho > 0:
        raise ValueError("rho must be positive")
    if k == 0:
        return np.zeros(0), SubproblemInfo(0.0, 0.0, 0.0, False)
    lam, V = _eig(P)
    gamma = V.T @ g
    gnorm = float(np.linalg.norm(g))
    mu_lo = max(0.0, -lam[0])
    minmask, gaps = _spectral_split(lam, mu_lo)
    scale = max(1.0, float(np.max(np.abs(lam))))
    singular = gaps <= 1e-12 * scale
    negligible = bool(np.all(np.abs(gamma[singular]) <= HARD_CASE_TOL * max(gnorm, 1e-300)))
    hard = False
    boundary = True
    if negligible and np.linalg.norm(gamma[~singular] / gaps[~singular]) <= rho:
        mu = mu_lo
        coef = np.zeros(k)
        coef[~singular] = -gamma[~singular] / gaps[~singular]
        if mu_lo > 0:
            hard = True
            coef[np.flatnonzero(singular)[0]] += np.sqrt(max(rho * rho - coef @ coef, 0.0))
        else:
            boundary = False
    else:
        h, hprime = _newton_pair(gamma, gaps, lambda dl: (rho, 0.0))
        hi = max(gnorm / rho - lam[0] - mu_lo, 1e-300)
        while h(hi) < 0:
            hi *= 2.0
        delta = _secular_root(h, hprime, 0.0, hi)
        mu = mu_lo + delta
        coef = -gamma / (gaps + delta)
    s = V @ coef
    nrm = float(np.linalg.norm(s))
    if boundary and nrm > 0:
        s = s * (rho / nrm)
    sec = abs(float(np.linalg.norm(s)) - rho) if boundary else 0.0
    kkt = float(np.linalg.norm(P @ s + mu * s + g))
    return s, SubproblemInfo(float(mu), sec, kkt, hard, boundary)


def solve_ball_constrained_cubic(model: ReducedModel):
    """Minimize the cubic model over ``||s|| <= rho``.

    If the unconstrained cubic minimizer is inside the ball it is returned;
    otherwise the constrained minimizer lies on the sphere, where the cubic term
    is constant, so the trust-region solution on ``||s|| <= rho`` is returned.
    """
    s, info = solve_unconstrained_cubic(model.g, model.P, model.M)
    if np.linalg.norm(s) <= model.rho:
        return s, info
    return solve_trust_region(model.g, model.P, model.rho)
