"""Independent reference computations used as test oracles."""

import numpy as np
from scipy.optimize import minimize


def ball_grid(k, rho, per_axis=None):
    """Dense grid of the closed ball of radius ``rho`` in R^k (at least 1e5 points for k >= 2)."""
    per_axis = per_axis or {1: 20001, 2: 401, 3: 65}[k]
    axes = [np.linspace(-rho, rho, per_axis)] * k
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, k)
    pts = pts[np.einsum("ij,ij->i", pts, pts) <= rho * rho]
    # the sphere itself, which the axis grid only touches at a few points
    if k == 1:
        sph = np.array([[-rho], [rho]])
    else:
        u = np.random.default_rng(0).normal(size=(20000, k))
        sph = rho * u / np.linalg.norm(u, axis=1, keepdims=True)
    return np.vstack([pts, sph])


def model_values(g, P, M, S):
    nrm = np.linalg.norm(S, axis=1)
    return S @ g + 0.5 * np.einsum("ij,jk,ik->i", S, P, S) + M / 6.0 * nrm**3


def brute_force_ball_min(g, P, M, rho, polish=5):
    """Grid minimum of the cubic model over ``||s|| <= rho`` refined by SLSQP from the best grid points."""
    g = np.asarray(g, float)
    P = np.asarray(P, float)
    k = g.size
    S = ball_grid(k, rho)
    vals = model_values(g, P, M, S)
    best = float(vals.min())
    order = np.argsort(vals)[:polish]

    def f(s):
        return float(g @ s + 0.5 * s @ P @ s + M / 6.0 * np.linalg.norm(s) ** 3)

    cons = [{"type": "ineq", "fun": lambda s: rho * rho - s @ s, "jac": lambda s: -2 * s}]
    for i in order:
        res = minimize(f, S[i], method="SLSQP", constraints=cons, options={"ftol": 1e-14, "maxiter": 500})
        s = res.x
        nrm = np.linalg.norm(s)
        if nrm > rho:
            s = s * (rho / nrm)
        best = min(best, f(s))
    return best


def random_model(rng, k, scale=None):
    """Random ``(g, P, M, rho)`` with mixed-sign spectrum."""
    scale = scale if scale is not None else 10 ** rng.uniform(-1, 1)
    B = rng.normal(size=(k, k))
    P = scale * (B + B.T) / 2
    g = 10 ** rng.uniform(-2, 1) * rng.normal(size=k)
    M = 10 ** rng.uniform(-1, 1.5)
    rho = rng.uniform(0.05, 0.95)
    return g, P, M, rho
