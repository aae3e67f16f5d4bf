"""Multi-start experiments: datasets x starts x solvers, with result tables."""

from __future__ import annotations

import csv
import json
import logging
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .biomodels import ModelSpec, as_conic_program, negative_log_likelihood, optimization_bounds, params_from_theta
from .datagen import DEFAULT_X0, RangeTable, dataset_rng, generate_dataset, range_table
from .problem import ConicProgram, ContractError, InfeasibleError, project_affine
from .solver import SOLVERS, SolverConfig

log = logging.getLogger(__name__)

CSV_COLUMNS = ("dataset_id", "solver", "start_id", "objective", "iterations", "wall_time_s", "termination", "fosp", "sosp")
START_LOG_LOW = 1e-3
START_LOG_HIGH = 100.0
START_DISTRIBUTION = (
    "finite bounds: uniform on (lo, hi); infinite upper bound: log-uniform on (lo + 1e-3, 100] "
    "(cap 100 * (lo + 1e-3) when lo + 1e-3 >= 100); "
    "then projected onto A theta = b and checked interior"
)


@dataclass
class ExperimentConfig:
    model: str = "phenopop"
    S: int = 1
    n_datasets: int = 100
    starts: int = 20
    seed: int = 0
    solvers: tuple = ("crnas",)
    solver_options: dict = field(default_factory=dict)
    output_dir: Optional[str] = None
    X0: float = DEFAULT_X0

    def __post_init__(self):
        self.solvers = tuple(self.solvers)
        if self.n_datasets < 1 or self.starts < 1:
            raise ContractError("n_datasets and starts must be >= 1")
        if self.S < 1:
            raise ContractError("S must be >= 1")
        unknown = [s for s in self.solvers if s not in SOLVERS]
        if unknown or not self.solvers:
            raise ContractError(f"unknown solvers {unknown}; choose from {sorted(SOLVERS)}")
        for name in self.solvers:
            self.solver_config(name)  # validate overrides early

    def solver_config(self, name: str) -> SolverConfig:
        # either {"crnas": {...}, "foas": {...}} or one flat dict shared by all solvers
        opts = self.solver_options.get(name, {}) if _nested(self.solver_options) else self.solver_options
        try:
            return SolverConfig(**dict(opts))
        except TypeError as exc:
            raise ContractError(str(exc)) from None

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ContractError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ContractError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["solvers"] = list(self.solvers)
        return d


def _nested(opts: dict) -> bool:
    return any(k in SOLVERS for k in opts)


def pool_size(n_tasks: int) -> int:
    """Worker count, capped by ``CRNAS_THREADS`` when set."""
    n = os.cpu_count() or 1
    cap = os.environ.get("CRNAS_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ContractError(f"CRNAS_THREADS must be an integer, got {cap!r}") from None
    return max(1, min(n, n_tasks))


# --------------------------------------------------------------------------- starts


def sample_initial_points(table: RangeTable, program: ConicProgram, count: int, rng=None, max_tries: int = 1000) -> list:
    """Random interior feasible starts for ``program`` (built from ``table.opt``)."""
    rng = np.random.default_rng(rng)
    spec = ModelSpec(program.meta["model"], program.meta["S"], program.meta.get("X0", DEFAULT_X0))
    lo, hi = optimization_bounds(spec, table.opt)
    fin = np.isfinite(hi)
    if np.any(~np.isfinite(lo)):
        raise ContractError("start sampling needs finite lower bounds")
    log_lo = np.log(lo + START_LOG_LOW)
    # a lower bound above the cap (large X0 noise floors) gets a cap of 100x the bound
    log_hi = np.maximum(np.log(START_LOG_HIGH), log_lo + np.log(START_LOG_HIGH))
    log_hi = np.where(log_lo < np.log(START_LOG_HIGH), np.log(START_LOG_HIGH), log_hi)
    starts = []
    for _ in range(count):
        for _ in range(max_tries):
            x = np.empty(lo.size)
            x[fin] = lo[fin] + (hi[fin] - lo[fin]) * rng.uniform(size=int(fin.sum()))
            x[~fin] = np.exp(rng.uniform(log_lo[~fin], log_hi[~fin]))
            theta = program.provenance.to_cone(x)
            if program.A.shape[0]:
                theta = project_affine(program.A, program.b, theta)
            if program.is_interior(theta):
                starts.append(theta)
                break
        else:
            raise InfeasibleError(f"no interior start found after {max_tries} draws")
    return starts


# --------------------------------------------------------------------------- metrics


def relative_likelihood(estimate, truth, dataset) -> float:
    """NLL at ``estimate`` divided by NLL at ``truth`` on the same data."""
    return negative_log_likelihood(dataset, estimate) / negative_log_likelihood(dataset, truth)


@dataclass
class ResultsTable:
    rows: list
    config: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda r: (r["dataset_id"], r["solver"], r["start_id"]))

    def __len__(self):
        return len(self.rows)

    def aggregates(self) -> list:
        groups: dict = {}
        for r in self.rows:
            groups.setdefault((r["dataset_id"], r["solver"]), []).append(r)
        out = []
        for (ds, solver), rows in sorted(groups.items()):
            ok = [r for r in rows if r["error"] is None and np.isfinite(r["objective"])]
            best = min(ok, key=lambda r: r["objective"]) if ok else None
            agg = {
                "dataset_id": ds,
                "solver": solver,
                "best_value": best["objective"] if best else float("nan"),
                "best_start": best["start_id"] if best else None,
                "iterations_to_best": best["best_iteration"] if best else None,
                "total_time": float(sum(r["wall_time_s"] for r in rows)),
                "failures": len(rows) - len(ok),
            }
            if best is not None and best.get("relative_likelihood") is not None:
                agg["relative_likelihood"] = best["relative_likelihood"]
            out.append(agg)
        return out

    def best_values(self, solver: str = "crnas") -> dict:
        return {a["dataset_id"]: a["best_value"] for a in self.aggregates() if a["solver"] == solver}

    def to_dict(self) -> dict:
        return {"config": self.config, "metadata": self.metadata, "rows": self.rows, "aggregates": self.aggregates()}

    @classmethod
    def from_dict(cls, d: dict) -> "ResultsTable":
        return cls(list(d["rows"]), dict(d.get("config", {})), dict(d.get("metadata", {})))

    def export(self, path, fmt: str = "csv") -> Path:
        if not self.rows:
            raise ValueError("empty results table")
        path = Path(path)
        if fmt == "csv":
            with path.open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(CSV_COLUMNS)
                for r in self.rows:
                    w.writerow([r[c] if not isinstance(r[c], float) else repr(r[c]) for c in CSV_COLUMNS])
        elif fmt == "json":
            path.write_text(json.dumps(self.to_dict(), indent=1, default=_jsonable))
        else:
            raise ValueError(f"unknown format {fmt!r}")
        return path

    @classmethod
    def load_json(cls, path) -> "ResultsTable":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(type(obj))


# --------------------------------------------------------------------------- experiment


def _start_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index), 1]))


def _dataset_task(cfg_dict: dict, index: int) -> list:
    cfg = ExperimentConfig.from_dict(cfg_dict)
    table = range_table(cfg.model, cfg.S, cfg.X0)
    spec = ModelSpec(cfg.model, cfg.S, cfg.X0)
    data = generate_dataset(cfg.model, cfg.S, dataset_rng(cfg.seed, index), cfg.X0, table)
    program = as_conic_program(spec, data, table.opt)
    starts = sample_initial_points(table, program, cfg.starts, _start_rng(cfg.seed, index))
    truth_nll = negative_log_likelihood(data, data.true_params) if cfg.model == "lbd" else None
    rows = []
    for solver in cfg.solvers:
        scfg = cfg.solver_config(solver)
        for j, theta0 in enumerate(starts):
            row = {"dataset_id": index, "solver": solver, "start_id": j, "error": None}
            t0 = time.perf_counter()
            try:
                rep = SOLVERS[solver](program, theta0, scfg)
                params = params_from_theta(spec, program, rep.best_theta)
                row.update(
                    objective=float(rep.best_objective),
                    iterations=int(rep.iterations),
                    best_iteration=int(rep.best_iteration),
                    termination=rep.termination,
                    fosp=float(rep.fosp),
                    sosp=float(rep.sosp),
                    params=params,
                )
                if truth_nll is not None:
                    row["relative_likelihood"] = float(rep.best_objective / truth_nll)
            except Exception as exc:  # recorded per row, the experiment carries on
                log.warning("dataset %d solver %s start %d failed: %s", index, solver, j, exc)
                row.update(
                    objective=float("nan"),
                    iterations=0,
                    best_iteration=0,
                    termination="error",
                    fosp=float("nan"),
                    sosp=float("nan"),
                    params=None,
                    error="".join(traceback.format_exception_only(type(exc), exc)).strip(),
                )
            row["wall_time_s"] = time.perf_counter() - t0
            rows.append(row)
    return rows


def run_experiment(config: ExperimentConfig, workers: Optional[int] = None) -> ResultsTable:
    cfg_dict = config.to_dict()
    n = workers or pool_size(config.n_datasets)
    rows = []
    t0 = time.perf_counter()
    if n == 1:
        for i in range(config.n_datasets):
            rows.extend(_dataset_task(cfg_dict, i))
    else:
        with ProcessPoolExecutor(max_workers=n) as pool:
            for part in pool.map(_dataset_task, [cfg_dict] * config.n_datasets, range(config.n_datasets)):
                rows.extend(part)
    meta = {
        "start_distribution": START_DISTRIBUTION,
        "workers": n,
        "elapsed_s": time.perf_counter() - t0,
        "csv_columns": list(CSV_COLUMNS),
    }
    table = ResultsTable(rows, cfg_dict, meta)
    if config.output_dir:
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        table.export(out / "results.csv", "csv")
        table.export(out / "results.json", "json")
    return table
