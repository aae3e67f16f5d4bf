import numpy as np
import pytest

from crnas import solver as solver_mod
from crnas.problem import ObjectiveOracle, residuals, unconstrained, ConicProgram


class RunAudit:
    """Every solve in the session is checked for decrease and interiority as it happens."""

    def __init__(self):
        self.runs = 0
        self.accepted = {"second_order": 0, "first_order": 0}
        self.decrease_violations = []
        self.worst_slack = {"second_order": np.inf, "first_order": np.inf}
        self.iterates = 0
        self.interior_violations = []

    def record(self, program, config, rep):
        self.runs += 1
        if config.adaptive_M:
            for dL, M, s in rep.decreases:
                bound = M / 12.0 * s**3 if rep.variant == "second_order" else M / 4.0 * s**2
                self.accepted[rep.variant] += 1
                self.worst_slack[rep.variant] = min(self.worst_slack[rep.variant], dL - bound)
                if dL < bound - 1e-12:
                    self.decrease_violations.append((rep.variant, dL, bound))
        tol = program.tolerance()
        for th in rep.iterates:
            self.iterates += 1
            res, mn = residuals(program, th)
            if not (mn > 0 and res <= tol):
                self.interior_violations.append((res, mn, tol))


AUDIT = RunAudit()
_orig_solve = solver_mod._solve


def _audited_solve(program, theta0, config):
    rep = _orig_solve(program, theta0, config)
    AUDIT.record(program, config, rep)
    return rep


solver_mod._solve = _audited_solve


def pytest_collection_modifyitems(config, items):
    # the whole-suite audits must run after every other test
    last = [it for it in items if "audit" in it.keywords]
    rest = [it for it in items if "audit" not in it.keywords]
    items[:] = rest + last


ACCEPTANCE_LINES = []


def report_criterion(number, ok, detail):
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def audit():
    return AUDIT


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --------------------------------------------------------------------------- small programs


def quadratic_oracle(Q, c):
    """``0.5 (x - c)^T Q (x - c)``."""
    Q = np.asarray(Q, dtype=float)
    c = np.asarray(c, dtype=float)
    return ObjectiveOracle(
        value=lambda x: 0.5 * (x - c) @ Q @ (x - c),
        gradient=lambda x: Q @ (x - c),
        hessian=lambda x: Q,
    )


def simplex_quadratic(c):
    """``min 0.5 ||theta - c||^2`` subject to ``sum(theta) = 1``; interior optimum when the projection is positive."""
    c = np.asarray(c, dtype=float)
    n = c.size
    prog = ConicProgram(quadratic_oracle(np.eye(n), c), np.ones((1, n)), np.array([1.0]))
    opt = c + (1.0 - c.sum()) / n
    return prog, opt


def saddle_program():
    """``theta_1 theta_2`` on ``theta_1 + theta_2 = 1``: concave along the line, stationary at (1/2, 1/2)."""
    H = np.array([[0.0, 1.0], [1.0, 0.0]])
    oracle = ObjectiveOracle(
        value=lambda x: float(x[0] * x[1]),
        gradient=lambda x: np.array([x[1], x[0]]),
        hessian=lambda x: H,
    )
    return ConicProgram(oracle, np.ones((1, 2)), np.array([1.0]))


def orthant_quadratic(Q, c):
    return unconstrained(quadratic_oracle(Q, c), len(c))


def random_spd(rng, n, lo=0.5, hi=5.0):
    U, _ = np.linalg.qr(rng.normal(size=(n, n)))
    return U @ np.diag(rng.uniform(lo, hi, n)) @ U.T
