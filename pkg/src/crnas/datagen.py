"""Synthetic case-study data: parameter ranges, grids and simulators."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .biomodels import Dataset, ModelSpec, hill_original

DEFAULT_X0 = 1000.0
STOCHASTIC_REPLICATES = 13
STANDARD_TIMES = np.arange(0.0, 37.0, 3.0)
STANDARD_DOSES = np.array([0, 0.0313, 0.0625, 0.125, 0.25, 0.375, 0.5, 1.25, 2.5, 3.75, 5.0])
LOGISTIC_TIMES = np.linspace(0.0, 10.0, 10)
C_MIN_FRACTION = 1e-3


@dataclass(frozen=True)
class GridSpec:
    times: np.ndarray
    doses: np.ndarray
    replicates: int = 1

    def __post_init__(self):
        for arr in (self.times, self.doses):
            arr = np.asarray(arr)
            if arr.size and (np.any(arr < 0) or np.any(np.diff(arr) <= 0)):
                raise ValueError("grids must be nonnegative and strictly increasing")


def default_grids(stochastic: bool = False) -> GridSpec:
    return GridSpec(STANDARD_TIMES.copy(), STANDARD_DOSES.copy(), STOCHASTIC_REPLICATES if stochastic else 1)


def dynamic_dose_grid(S: int) -> np.ndarray:
    """Zero plus ``4S - 1`` log-spaced doses from 0.01 to 10."""
    if S < 2:
        raise ValueError("dynamic dose grids are defined for S >= 2")
    return np.concatenate([[0.0], np.logspace(-2.0, 1.0, 4 * S - 1)])


_TABLE4_BANDS = ((0.005, 0.0299), (0.119, 0.4736), (1.8854, 7.5059))


def ec50_bands(S: int) -> list:
    """Biologically feasible EC50 interval per subpopulation."""
    if S == 1:
        return [(0.05, 0.1)]
    if S == 2:
        return [(0.05, 0.1), (0.5, 2.5)]
    if S == 3:
        return list(_TABLE4_BANDS)
    # bands two log-spacings wide, one 4-dose block apart; the offset 0.415
    # spacings below the top dose reproduces the S = 3 upper ends
    step = 3.0 / (4 * S - 2)
    bands = []
    for j in range(1, S + 1):
        upper = 10.0 ** (1.0 - step * (4 * (S - j) + 0.415))
        lower = 0.005 if j == 1 else upper * 10.0 ** (-2.0 * step)
        bands.append((lower, upper))
    return bands


@dataclass(frozen=True)
class RangeTable:
    """Biologically feasible (``bio``) and optimization (``opt``) intervals.

    Keys are base names (``alpha``) or indexed names (``E2``); indexed keys win.
    """

    kind: str
    S: int
    bio: dict
    opt: dict
    notes: dict = field(default_factory=dict)

    def bio_range(self, name: str, i: int):
        return self.bio.get(f"{name}{i + 1}", self.bio.get(name))

    def opt_range(self, name: str, i: int):
        return self.opt.get(f"{name}{i + 1}", self.opt.get(name))

    def check(self):
        for key, (a, b) in self.bio.items():
            if key == "beta" and self.kind == "lbd":
                continue  # relative to nu
            base = key.rstrip("0123456789")
            oa, ob = self.opt.get(key, self.opt.get(base))
            if not (a < b and oa <= a and b <= ob):
                raise ValueError(f"bio range for {key} not inside optimization range")


def range_table(kind: str, S: int, X0: float = DEFAULT_X0) -> RangeTable:
    inf = np.inf
    if kind == "phenopop":
        bio = {"p": (0.0, 1.0), "alpha": (0.0, 0.1), "b": (0.8, 1.0), "n": (1.5, 5.0)}
        for i, band in enumerate(ec50_bands(S)):
            bio[f"E{i + 1}"] = band
        opt = {"p": (0.0, 1.0), "alpha": (0.0, 1.0), "b": (0.0, 1.0), "E": (0.0, inf), "n": (0.0, inf)}
        table = RangeTable(kind, S, bio, opt)
    elif kind == "lbd":
        c_min = C_MIN_FRACTION * X0
        bio = {
            "p": (0.0, 1.0),
            "nu": (0.0, 1.0),
            "beta": (0.0, 0.1),  # offset above nu
            "b": (0.8, 1.0),
            "n": (1.5, 5.0),
            "c": (0.01 * X0, 0.05 * X0),
        }
        for i, band in enumerate(ec50_bands(S)):
            bio[f"E{i + 1}"] = band
        opt = {
            "p": (0.0, 1.0),
            "beta": (0.0, 1.0),
            "nu": (0.0, 1.0),
            "b": (0.0, 1.0),
            "E": (0.0, inf),
            "n": (0.0, inf),
            "c": (c_min, inf),
        }
        table = RangeTable(kind, S, bio, opt, notes={"beta": "beta = nu + U(0, 0.1), redrawn until beta < 1"})
    elif kind == "logistic":
        if S != 2:
            bio = {"p": (0.0, 1.0), "alpha": (0.0, 1.0), "beta": (0.0, 1.0)}
        else:
            bio = {"p": (0.0, 1.0), "alpha1": (0.0, 1.0), "beta1": (0.0, 1.0), "alpha2": (2.0, 3.0), "beta2": (2.0, 3.0)}
        opt = {"p": (0.0, 1.0), "alpha": (0.0, 10.0), "beta": (0.0, 10.0)}
        table = RangeTable(kind, S, bio, opt)
    else:
        raise ValueError(f"unknown model {kind!r}")
    table.check()
    return table


def _open_uniform(rng, lo, hi):
    while True:
        v = rng.uniform(lo, hi)
        if lo < v < hi:
            return float(v)


def sample_proportions(S: int, rng) -> list:
    if S == 1:
        return [1.0]
    if S == 2:
        p1 = _open_uniform(rng, 0.0, 1.0)
        return [p1, 1.0 - p1]
    return [float(v) for v in rng.dirichlet(np.ones(S))]


def sample_true_params(kind: str, S: int, table: RangeTable, rng) -> dict:
    """Uniform draws from the biologically feasible ranges (``E`` in original form)."""
    rng = np.random.default_rng(rng)
    out = {"p": sample_proportions(S, rng)}
    spec = ModelSpec(kind, S)
    for var in spec.block:
        if var == "p":
            continue
        name = "E" if var == "Ecal" else var
        vals = []
        for i in range(S):
            if kind == "lbd" and name in ("beta", "nu"):
                continue
            vals.append(_open_uniform(rng, *table.bio_range(name, i)))
        if vals:
            out[name] = vals
    if kind == "lbd":
        nus, betas = [], []
        for i in range(S):
            while True:
                nu = _open_uniform(rng, *table.bio_range("nu", i))
                beta = nu + _open_uniform(rng, *table.bio_range("beta", i))
                if beta < table.opt_range("beta", i)[1]:
                    break
            nus.append(nu)
            betas.append(beta)
        out["nu"], out["beta"] = nus, betas
        out["c"] = _open_uniform(rng, *table.bio["c"])
    return out


def grids_for(kind: str, S: int) -> GridSpec:
    if kind == "logistic":
        return GridSpec(LOGISTIC_TIMES.copy(), np.zeros(0), 1)
    if kind == "lbd":
        return default_grids(stochastic=True)
    if S >= 3:
        return GridSpec(STANDARD_TIMES.copy(), dynamic_dose_grid(S), 1)
    return default_grids()


def simulate_deterministic(kind: str, params: dict, grids: GridSpec, X0: float = DEFAULT_X0) -> Dataset:
    """Noise-free observations equal to the model mean; one replicate."""
    S = len(params["p"])
    spec = ModelSpec(kind, S, X0)
    x = spec.pack(params)
    if kind == "logistic":
        obs = spec.mean(x, grids.times)
    else:
        obs = spec.mean(x, grids.times, grids.doses)[..., None]
    return Dataset(kind, S, grids.times, grids.doses, obs, X0, true_params=params)


def gillespie_bd(initial: int, birth: float, death: float, times, rng=None) -> np.ndarray:
    """Exact linear birth-death trajectory observed at ``times`` (sorted, nonnegative)."""
    if birth < 0 or death < 0 or initial < 0:
        raise ValueError("rates and initial count must be nonnegative")
    rng = np.random.default_rng(rng)
    times = np.asarray(times, dtype=float)
    order = np.argsort(times, kind="stable")
    seed = int(rng.integers(0, 2**32 - 1))
    path = _kernels.bd_path(int(initial), birth, death, times[order], seed)
    out = np.empty_like(path)
    out[order] = path
    return out


def simulate_lbd(params: dict, grids: GridSpec, rng=None, X0: float = DEFAULT_X0) -> Dataset:
    """Sum of independent subpopulation runs per ``(t, d, r)`` plus Gaussian noise ``N(0, c^2)``."""
    rng = np.random.default_rng(rng)
    S = len(params["p"])
    T, D, R = grids.times.size, grids.doses.size, grids.replicates
    counts = np.zeros((T, D, R))
    t_end = np.repeat(grids.times, R)
    for i in range(S):
        x0 = int(round(X0 * params["p"][i]))
        H = hill_original(grids.doses, params["b"][i], params["E"][i], params["n"][i])
        death = params["nu"][i] - np.log(H)
        for j in range(D):
            seed = int(rng.integers(0, 2**32 - 1))
            ends = _kernels.bd_endpoints(np.full(T * R, x0), params["beta"][i], death[j], t_end, seed)
            counts[:, j, :] += ends.reshape(T, R)
    noise = rng.normal(0.0, params["c"], size=counts.shape) if params["c"] > 0 else 0.0
    return Dataset("lbd", S, grids.times, grids.doses, counts + noise, X0, true_params=params)


def generate_dataset(kind: str, S: int, rng=None, X0: float = DEFAULT_X0, table: RangeTable = None) -> Dataset:
    rng = np.random.default_rng(rng)
    table = table or range_table(kind, S, X0)
    params = sample_true_params(kind, S, table, rng)
    grids = grids_for(kind, S)
    if kind == "lbd":
        return simulate_lbd(params, grids, rng, X0)
    return simulate_deterministic(kind, params, grids, X0)


def dataset_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent stream for dataset ``index`` under ``master_seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), int(index)]))


# --------------------------------------------------------------------------- I/O


def dataset_to_dict(data: Dataset) -> dict:
    return {
        "model": data.model,
        "S": data.S,
        "grids": {"times": data.times.tolist(), "doses": data.doses.tolist(), "R": data.replicates},
        "X0": data.X0,
        "true_params": data.true_params,
        "observations": data.observations.tolist(),
    }


def dataset_from_dict(d: dict) -> Dataset:
    return Dataset(
        d["model"],
        int(d["S"]),
        d["grids"]["times"],
        d["grids"]["doses"],
        np.asarray(d["observations"], dtype=float),
        float(d["X0"]),
        true_params=d.get("true_params"),
    )


def save_json(data: Dataset, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(dataset_to_dict(data)))
    return path


def load_json(path) -> Dataset:
    return dataset_from_dict(json.loads(Path(path).read_text()))


def save_csv(data: Dataset, path) -> Path:
    """Flat table with columns ``t, d, r, x`` (``d`` empty for logistic data)."""
    path = Path(path)
    obs = data.observations
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "d", "r", "x"])
        if data.model == "logistic":
            obs = obs.reshape(data.times.size, -1)
            for a, t in enumerate(data.times):
                for r in range(obs.shape[1]):
                    w.writerow([repr(float(t)), "", r, repr(float(obs[a, r]))])
        else:
            obs = obs.reshape(data.times.size, data.doses.size, -1)
            for a, t in enumerate(data.times):
                for b, d in enumerate(data.doses):
                    for r in range(obs.shape[2]):
                        w.writerow([repr(float(t)), repr(float(d)), r, repr(float(obs[a, b, r]))])
    return path


def load_csv(path, model: str, S: int, X0: float = DEFAULT_X0) -> Dataset:
    rows = list(csv.DictReader(Path(path).open()))
    times = np.array(sorted({float(r["t"]) for r in rows}))
    R = max(int(r["r"]) for r in rows) + 1
    if model == "logistic":
        obs = np.empty((times.size, R))
        for r in rows:
            obs[np.searchsorted(times, float(r["t"])), int(r["r"])] = float(r["x"])
        return Dataset(model, S, times, [], obs if R > 1 else obs[:, 0], X0)
    doses = np.array(sorted({float(r["d"]) for r in rows}))
    obs = np.empty((times.size, doses.size, R))
    for r in rows:
        obs[np.searchsorted(times, float(r["t"])), np.searchsorted(doses, float(r["d"])), int(r["r"])] = float(r["x"])
    return Dataset(model, S, times, doses, obs, X0)
