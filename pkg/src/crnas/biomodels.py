"""Case-study objectives for heterogeneous cell populations.

* PhenoPop: mixture of exponentially growing subpopulations whose growth rate is
  shifted by ``log H(d)``, fit by least squares.
* LBD: linear birth-death subpopulations with cytotoxic drug effect, fit by the
  Gaussian negative log-likelihood built from the process mean and variance.
* Logistic: mixture of unit-capacity logistic curves, fit by least squares.

Every objective is differentiated exactly (second-order jets) in the
optimization coordinates, where the Hill EC50 ``E`` is replaced by
``Ecal = E**n``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import jet as J
from .jet import Jet
from .problem import ConicProgram, ObjectiveOracle, from_box_constrained

SERIES_SWITCH = 1e-5
MODEL_KINDS = ("phenopop", "lbd", "logistic")


# --------------------------------------------------------------------------- Hill


@dataclass(frozen=True)
class HillParams:
    b: float
    Ecal: float
    n: float

    def __post_init__(self):
        if not (0 < self.b < 1 and self.Ecal > 0 and self.n > 0):
            raise ValueError(f"invalid Hill parameters {self}")

    @classmethod
    def from_E(cls, b, E, n):
        return cls(b, E**n, n)

    @property
    def E(self) -> float:
        return self.Ecal ** (1.0 / self.n)


def hill_original(d, b, E, n):
    """``b + (1 - b) / (1 + (d/E)**n)``."""
    d = np.asarray(d, dtype=float)
    return b + (1.0 - b) / (1.0 + (d / E) ** n)


def _hill_logq(d, Ecal, n):
    # log(d**n / Ecal), with d == 0 sent to -inf for any n
    d = np.asarray(d, dtype=float)
    pos = d > 0
    logd = np.log(np.where(pos, d, 1.0))
    return n * logd - J.log(Ecal) + np.where(pos, 0.0, -np.inf)


def hill_transformed(d, b, Ecal, n):
    return b + (1.0 - b) * J.inv1pexp(_hill_logq(d, Ecal, n))


def hill(d, params: HillParams):
    """Fraction of viable cells at dose ``d`` in the ``Ecal = E**n`` form."""
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("dose must be nonnegative")
    return hill_transformed(d, params.b, params.Ecal, params.n)


# --------------------------------------------------------------------------- data


@dataclass
class Dataset:
    model: str
    S: int
    times: np.ndarray
    doses: np.ndarray
    observations: np.ndarray
    X0: float
    true_params: Optional[dict] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.doses = np.asarray(self.doses, dtype=float)
        self.observations = np.asarray(self.observations, dtype=float)
        expect = (self.times.size,) if self.model == "logistic" else (self.times.size, self.doses.size)
        if self.observations.shape[: len(expect)] != expect:
            raise ValueError(f"observations shape {self.observations.shape} does not match grid {expect}")

    @property
    def replicates(self) -> int:
        base = 1 if self.model == "logistic" else 2
        return 1 if self.observations.ndim == base else self.observations.shape[-1]

    def _with_rep_axis(self):
        base = 1 if self.model == "logistic" else 2
        obs = self.observations
        return obs[..., None] if obs.ndim == base else obs

    def cell_stats(self):
        """Per-cell replicate mean and within-cell sum of squared deviations."""
        obs = self._with_rep_axis()
        mean = obs.mean(axis=-1)
        ss0 = np.sum((obs - mean[..., None]) ** 2, axis=-1)
        return mean, ss0, obs.shape[-1]


# --------------------------------------------------------------------------- models


@dataclass(frozen=True)
class ModelSpec:
    """Parameter layout of one case-study model.

    Optimization vectors list the per-subpopulation blocks in order, followed
    by shared parameters. With ``S == 1`` the proportion is fixed at 1 and omitted.
    """

    kind: str
    S: int
    X0: float = 1000.0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model {self.kind!r}")
        if self.S < 1:
            raise ValueError("S must be >= 1")

    @property
    def block(self) -> tuple:
        return {
            "phenopop": ("p", "alpha", "b", "Ecal", "n"),
            "lbd": ("p", "beta", "nu", "b", "Ecal", "n"),
            "logistic": ("p", "alpha", "beta"),
        }[self.kind]

    @property
    def block_vars(self) -> tuple:
        return self.block if self.S > 1 else self.block[1:]

    @property
    def shared(self) -> tuple:
        return ("c",) if self.kind == "lbd" else ()

    @property
    def names(self) -> tuple:
        out = [f"{v}{i + 1}" for i in range(self.S) for v in self.block_vars]
        return tuple(out) + self.shared

    @property
    def dim(self) -> int:
        return len(self.names)

    def index(self, var: str, i: int = 0) -> int:
        if var in self.shared:
            return self.S * len(self.block_vars) + self.shared.index(var)
        return i * len(self.block_vars) + self.block_vars.index(var)

    def split(self, x):
        """Per-subpopulation dicts of (possibly jet) scalars, plus shared dict."""
        w = len(self.block_vars)
        subs = []
        for i in range(self.S):
            blk = dict(zip(self.block_vars, x[i * w : (i + 1) * w]))
            if self.S == 1:
                blk["p"] = 1.0
            subs.append(blk)
        shared = dict(zip(self.shared, x[self.S * w :]))
        return subs, shared

    # parameter dicts use original E, not Ecal
    def pack(self, params: dict) -> np.ndarray:
        x = np.empty(self.dim)
        for i in range(self.S):
            for v in self.block_vars:
                if v == "Ecal":
                    x[self.index(v, i)] = params["E"][i] ** params["n"][i]
                else:
                    x[self.index(v, i)] = params[v][i]
        for v in self.shared:
            x[self.index(v)] = params[v]
        return x

    def unpack(self, x) -> dict:
        x = np.asarray(x, dtype=float)
        out = {}
        for v in self.block:
            if v == "p" and self.S == 1:
                out["p"] = [1.0]
            elif v == "Ecal":
                continue
            else:
                out[v] = [float(x[self.index(v, i)]) for i in range(self.S)]
        if "Ecal" in self.block:
            with np.errstate(over="ignore"):
                out["E"] = [
                    float(x[self.index("Ecal", i)] ** (1.0 / x[self.index("n", i)])) for i in range(self.S)
                ]
        for v in self.shared:
            out[v] = float(x[self.index(v)])
        return out

    # ------------------------------------------------------------ predictions

    def mean(self, x, times, doses=None):
        """Expected total count on the grid (``T x D``; ``T`` for logistic)."""
        subs, _ = self.split(x)
        t = np.asarray(times, dtype=float)
        if self.kind == "logistic":
            return sum(_logistic_sub(t, s, self.X0) for s in subs)
        t = t[:, None]
        d = np.asarray(doses, dtype=float)[None, :]
        if self.kind == "phenopop":
            return sum(_phenopop_sub(t, d, s, self.X0) for s in subs)
        total = 0.0
        for s in subs:
            mu, _ = _lbd_sub_moments(t, d, s)
            total = total + s["p"] * self.X0 * mu
        return total

    # ------------------------------------------------------------ objectives

    def _objective(self, x, data: Dataset):
        mean, ss0, R = data.cell_stats()
        if self.kind in ("phenopop", "logistic"):
            f = self.mean(x, data.times, data.doses)
            r = mean - f
            return (ss0 + R * r * r).sum()
        subs, shared = self.split(x)
        t = data.times[:, None]
        d = data.doses[None, :]
        mu = 0.0
        var = 0.0
        for s in subs:
            mi, vi = _lbd_sub_moments(t, d, s)
            mu = mu + s["p"] * self.X0 * mi
            var = var + s["p"] * self.X0 * vi
        V = var + shared["c"] * shared["c"]
        r = mean - mu
        nll = 0.5 * R * J.log(2.0 * np.pi * V) + (ss0 + R * r * r) / (2.0 * V)
        return nll.sum()

    def value(self, x, data: Dataset) -> float:
        return float(np.sum(self._objective(np.asarray(x, dtype=float), data)))

    def objective(self, x, data: Dataset):
        """``(value, gradient, hessian)`` in optimization coordinates."""
        x = np.asarray(x, dtype=float)
        if x.size != self.dim:
            raise ValueError(f"expected {self.dim} parameters, got {x.size}")
        out = self._objective(Jet.variables(x), data)
        H = np.array(out.h, dtype=float)
        return float(out.v), np.array(out.g, dtype=float), 0.5 * (H + H.T)

    def oracle(self, data: Dataset) -> ObjectiveOracle:
        return ObjectiveOracle.from_full(
            lambda x: self.objective(x, data), value=lambda x: self.value(x, data)
        )


def _phenopop_sub(t, d, s, X0):
    H = hill_transformed(d, s["b"], s["Ecal"], s["n"])
    return s["p"] * X0 * J.exp(t * (s["alpha"] + J.log(H)))


def _logistic_sub(t, s, X0):
    return s["p"] * X0 * J.inv1pexp(-s["alpha"] * t + s["beta"])


def _lbd_sub_moments(t, d, s):
    H = hill_transformed(d, s["b"], s["Ecal"], s["n"])
    nu_d = s["nu"] - J.log(H)
    lam = s["beta"] - nu_d
    x = lam * t
    mu = J.exp(x)
    var = (s["beta"] + nu_d) * t * mu * J.exprel(x)
    return mu, var


# --------------------------------------------------------------------------- spec-level functions


def lbd_moments(t, d, beta, nu, hill_params: Optional[HillParams] = None):
    """Per-cell mean and variance factors ``(mu_i, sigma_i^2)`` of a linear birth-death process.

    The variance ``(beta + nu_d)/lam * (exp(2 t lam) - exp(t lam))`` has a
    removable singularity at ``lam = 0``; below ``|lam t| < 1e-5`` it is
    evaluated as ``(beta + nu_d) t (1 + 1.5 x + 7/6 x^2)``.
    """
    t = np.asarray(t, dtype=float)
    d = np.asarray(d, dtype=float)
    logH = 0.0 if hill_params is None else np.log(hill(d, hill_params))
    nu_d = nu - logH
    lam = beta - nu_d
    x = lam * t
    mu = np.exp(x)
    small = np.abs(x) < SERIES_SWITCH
    x_safe = np.where(small, 1.0, x)
    direct = (beta + nu_d) * t * np.exp(x_safe) * np.expm1(x_safe) / x_safe
    series = (beta + nu_d) * t * (1.0 + 1.5 * x + 7.0 / 6.0 * x * x)
    var = np.where(small, series, direct)
    if var.ndim == 0:
        return float(mu), float(var)
    return mu, var


def phenopop_predict(t, d, params: dict, X0: float = 1000.0):
    spec = ModelSpec("phenopop", len(params["alpha"]), X0)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    d = np.atleast_1d(np.asarray(d, dtype=float))
    if np.any(t < 0) or np.any(d < 0):
        raise ValueError("times and doses must be nonnegative")
    return spec.mean(spec.pack(params), t, d)


def logistic_predict(t, params: dict, X0: float = 1000.0):
    spec = ModelSpec("logistic", len(params["alpha"]), X0)
    return spec.mean(spec.pack(params), np.atleast_1d(np.asarray(t, dtype=float)))


def _objective_for(kind, dataset: Dataset, params):
    spec = ModelSpec(kind, dataset.S, dataset.X0)
    x = spec.pack(params) if isinstance(params, dict) else np.asarray(params, dtype=float)
    return spec.objective(x, dataset)


def phenopop_objective(dataset: Dataset, params):
    return _objective_for("phenopop", dataset, params)


def lbd_nll(dataset: Dataset, params):
    return _objective_for("lbd", dataset, params)


def logistic_objective(dataset: Dataset, params):
    return _objective_for("logistic", dataset, params)


def negative_log_likelihood(dataset: Dataset, params) -> float:
    spec = ModelSpec(dataset.model, dataset.S, dataset.X0)
    x = spec.pack(params) if isinstance(params, dict) else np.asarray(params, dtype=float)
    return spec.value(x, dataset)


# --------------------------------------------------------------------------- programs


def optimization_bounds(spec: ModelSpec, ranges: dict):
    """Lower/upper arrays for the optimization vector from per-name open intervals.

    ``ranges`` maps base names (``p``, ``alpha``, ``E``, ``c`` ...) or indexed
    names (``E1``) to ``(lo, hi)``. ``Ecal`` takes the ``E`` entry, which must be
    ``(0, inf)``: a finite EC50 bound is not a box bound on ``E**n``.
    """
    lo = np.empty(spec.dim)
    hi = np.empty(spec.dim)
    for j, name in enumerate(spec.names):
        base = name.rstrip("0123456789")
        key = "E" if base == "Ecal" else base
        idx_key = key + name[len(base):]
        if idx_key in ranges:
            a, b = ranges[idx_key]
        elif key in ranges:
            a, b = ranges[key]
        else:
            raise KeyError(f"no optimization range for {name}")
        if base == "Ecal":
            if a != 0 or np.isfinite(b):
                raise ValueError("finite EC50 bounds are not representable in Ecal coordinates")
            a, b = 0.0, np.inf
        lo[j], hi[j] = a, b
    return lo, hi


def as_conic_program(spec: ModelSpec, dataset: Dataset, ranges: dict) -> ConicProgram:
    """Box-reduced program over the model's optimization vector plus ``sum(p) = 1``."""
    lo, hi = optimization_bounds(spec, ranges)
    if spec.S > 1:
        A = np.zeros((1, spec.dim))
        A[0, [spec.index("p", i) for i in range(spec.S)]] = 1.0
        b = np.array([1.0])
    else:
        A, b = None, None
    prog = from_box_constrained(spec.oracle(dataset), A, b, lo, hi, names=spec.names)
    prog.meta.update(model=spec.kind, S=spec.S, X0=spec.X0)
    return prog


def params_from_theta(spec: ModelSpec, program: ConicProgram, theta) -> dict:
    """Report cone coordinates as model parameters with ``E = Ecal**(1/n)``."""
    return spec.unpack(program.provenance.to_original(theta))
