"""Central finite-difference certification of the case-study objective derivatives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .biomodels import MODEL_KINDS, ModelSpec
from .datagen import generate_dataset, range_table, sample_true_params

REL_STEP = 1e-5


def fd_gradient(f, x, rel_step: float = REL_STEP):
    x = np.asarray(x, dtype=float)
    g = np.empty(x.size)
    for i in range(x.size):
        h = rel_step * max(abs(x[i]), 1e-12)
        e = np.zeros(x.size)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def fd_hessian(grad, x, rel_step: float = REL_STEP):
    """Columns are central differences of ``grad``, then symmetrized."""
    x = np.asarray(x, dtype=float)
    H = np.empty((x.size, x.size))
    for i in range(x.size):
        h = rel_step * max(abs(x[i]), 1e-12)
        e = np.zeros(x.size)
        e[i] = h
        H[:, i] = (grad(x + e) - grad(x - e)) / (2 * h)
    return 0.5 * (H + H.T)


def rel_err(approx, exact) -> float:
    approx = np.asarray(approx, dtype=float)
    exact = np.asarray(exact, dtype=float)
    scale = max(np.linalg.norm(exact), 1e-300)
    return float(np.linalg.norm(approx - exact) / scale)


@dataclass
class DerivativeReport:
    model: str
    S: int
    points: int
    max_grad_err: float
    max_hess_err: float
    tol: float

    @property
    def ok(self) -> bool:
        return self.max_grad_err < self.tol and self.max_hess_err < self.tol

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        return (
            f"{status} {self.model} S={self.S}: {self.points} points, "
            f"grad rel-err {self.max_grad_err:.2e}, hess rel-err {self.max_hess_err:.2e} (tol {self.tol:g})"
        )


def check_model(kind: str, S: int = 2, points: int = 100, seed: int = 0, tol: float = 1e-5) -> DerivativeReport:
    """Compare jet derivatives with central differences at interior probes.

    Probes are fresh draws from the biologically feasible ranges, which keeps
    every coordinate bounded away from the cone boundary.
    """
    rng = np.random.default_rng(seed)
    spec = ModelSpec(kind, S)
    table = range_table(kind, S)
    data = generate_dataset(kind, S, rng, table=table)
    gerr = herr = 0.0
    for _ in range(points):
        x = spec.pack(sample_true_params(kind, S, table, rng))
        _, g, H = spec.objective(x, data)
        g_fd = fd_gradient(lambda y: spec.value(y, data), x)
        H_fd = fd_hessian(lambda y: spec.objective(y, data)[1], x)
        gerr = max(gerr, rel_err(g_fd, g))
        herr = max(herr, rel_err(H_fd, H))
    return DerivativeReport(kind, S, points, gerr, herr, tol)


def check_all(points: int = 100, seed: int = 0, S: int = 2, tol: float = 1e-5) -> list:
    return [check_model(kind, S, points, seed + i, tol) for i, kind in enumerate(MODEL_KINDS)]
