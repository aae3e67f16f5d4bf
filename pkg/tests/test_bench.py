import csv
import json

import numpy as np
import pytest

from crnas import bench
from crnas.bench import (
    CSV_COLUMNS,
    ExperimentConfig,
    ResultsTable,
    pool_size,
    relative_likelihood,
    run_experiment,
    sample_initial_points,
)
from crnas.biomodels import ModelSpec, as_conic_program
from crnas.datagen import generate_dataset, range_table
from crnas.problem import ContractError, InfeasibleError, residuals


def _program(kind, S, seed=0):
    table = range_table(kind, S)
    data = generate_dataset(kind, S, np.random.default_rng(seed), table=table)
    return table, data, as_conic_program(ModelSpec(kind, S), data, table.opt)


def test_config_validation():
    with pytest.raises(ContractError):
        ExperimentConfig(n_datasets=0)
    with pytest.raises(ContractError):
        ExperimentConfig(solvers=("newton",))
    with pytest.raises(ContractError):
        ExperimentConfig(solver_options={"alpha": 2.0})
    with pytest.raises(ContractError):
        ExperimentConfig(solver_options={"crnas": {"gamma": 1.0}})
    with pytest.raises(ContractError):
        ExperimentConfig.from_dict({"model": "phenopop", "datasets": 3})
    cfg = ExperimentConfig(solvers=["crnas", "foas"], solver_options={"foas": {"max_iter": 7}})
    assert cfg.solver_config("foas").max_iter == 7 and cfg.solver_config("crnas").max_iter == 500
    assert ExperimentConfig(solver_options={"alpha": 0.3}).solver_config("crnas").alpha == 0.3


def test_config_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"model": "logistic", "S": 2, "n_datasets": 2, "starts": 3}))
    cfg = ExperimentConfig.from_json(p)
    assert cfg.model == "logistic" and cfg.starts == 3
    p.write_text("{not json")
    with pytest.raises(ContractError):
        ExperimentConfig.from_json(p)


def test_pool_size(monkeypatch):
    monkeypatch.setenv("CRNAS_THREADS", "1")
    assert pool_size(50) == 1
    monkeypatch.setenv("CRNAS_THREADS", "many")
    with pytest.raises(ContractError):
        pool_size(5)
    monkeypatch.delenv("CRNAS_THREADS")
    assert 1 <= pool_size(3) <= 3


@pytest.mark.parametrize("kind,S", [("phenopop", 1), ("phenopop", 2), ("lbd", 1), ("logistic", 2)])
def test_starts_are_interior(kind, S):
    table, _, prog = _program(kind, S)
    starts = sample_initial_points(table, prog, 20, np.random.default_rng(1))
    spec = ModelSpec(kind, S)
    for th in starts:
        res, mn = residuals(prog, th)
        assert mn > 0 and res <= prog.tolerance()
        if S == 2:
            x = prog.provenance.to_original(th)
            assert x[spec.index("p", 0)] + x[spec.index("p", 1)] == pytest.approx(1.0, abs=1e-8)
    again = sample_initial_points(table, prog, 20, np.random.default_rng(1))
    for a, b in zip(starts, again):
        np.testing.assert_array_equal(a, b)


def test_starts_unbounded_coordinates_loguniform():
    table, _, prog = _program("phenopop", 1)
    starts = sample_initial_points(table, prog, 400, np.random.default_rng(2))
    spec = ModelSpec("phenopop", 1)
    n = np.array([prog.provenance.to_original(th)[spec.index("n")] for th in starts])
    assert n.min() > 1e-3 and n.max() <= 100
    # log-uniform on (1e-3, 100]: about half the mass below the geometric midpoint 10^-0.5
    assert 0.4 < np.mean(n < 10**-0.5) < 0.6


def test_starts_infeasible(monkeypatch):
    table, _, prog = _program("phenopop", 2)
    monkeypatch.setattr(type(prog), "is_interior", lambda self, th: False)
    with pytest.raises(InfeasibleError):
        sample_initial_points(table, prog, 1, np.random.default_rng(0), max_tries=10)


def test_relative_likelihood(rng):
    data = generate_dataset("lbd", 1, rng)
    assert relative_likelihood(data.true_params, data.true_params, data) == 1.0
    bad = json.loads(json.dumps(data.true_params))
    bad["E"] = [bad["E"][0] * 4]
    assert relative_likelihood(bad, data.true_params, data) > 1


def test_smoke_experiment(tmp_path):
    cfg = ExperimentConfig("phenopop", 1, n_datasets=2, starts=2, seed=3, solvers=("crnas", "foas"), output_dir=str(tmp_path))
    table = run_experiment(cfg, workers=1)
    assert len(table) == 2 * 2 * 2
    for solver in ("crnas", "foas"):
        assert sum(r["solver"] == solver for r in table.rows) == 4
    aggs = table.aggregates()
    for a in aggs:
        objs = [r["objective"] for r in table.rows if (r["dataset_id"], r["solver"]) == (a["dataset_id"], a["solver"])]
        assert a["best_value"] == min(objs)
        best_row = next(r for r in table.rows if r["dataset_id"] == a["dataset_id"] and r["solver"] == a["solver"] and r["start_id"] == a["best_start"])
        assert a["iterations_to_best"] == best_row["best_iteration"]
        assert a["total_time"] == pytest.approx(sum(r["wall_time_s"] for r in table.rows if (r["dataset_id"], r["solver"]) == (a["dataset_id"], a["solver"])))
    assert all(v < 1e-6 for v in table.best_values("crnas").values())

    lines = (tmp_path / "results.csv").read_text().splitlines()
    assert lines[0] == "dataset_id,solver,start_id,objective,iterations,wall_time_s,termination,fosp,sosp"
    assert len(lines) == 1 + len(table)
    rows = list(csv.DictReader(lines))
    assert tuple(rows[0]) == CSV_COLUMNS
    back = ResultsTable.load_json(tmp_path / "results.json")
    assert back.rows == json.loads(json.dumps(table.rows))
    assert back.aggregates() == json.loads(json.dumps(table.aggregates()))
    assert "log-uniform" in back.metadata["start_distribution"]

    again = run_experiment(cfg, workers=1)
    strip = lambda rows: [{k: v for k, v in r.items() if k != "wall_time_s"} for r in rows]  # noqa: E731
    assert strip(again.rows) == strip(table.rows)


def test_parallel_matches_serial():
    cfg = ExperimentConfig("logistic", 2, n_datasets=2, starts=2, seed=1)
    a = run_experiment(cfg, workers=1)
    b = run_experiment(cfg, workers=2)
    strip = lambda rows: [{k: v for k, v in r.items() if k != "wall_time_s"} for r in rows]  # noqa: E731
    assert strip(a.rows) == strip(b.rows)


def test_solver_error_is_recorded(monkeypatch):
    calls = {"n": 0}
    real = bench.SOLVERS["crnas"]

    def flaky(program, theta0, config):
        calls["n"] += 1
        if calls["n"] == 2:
            raise FloatingPointError("boom")
        return real(program, theta0, config)

    monkeypatch.setitem(bench.SOLVERS, "crnas", flaky)
    table = run_experiment(ExperimentConfig("phenopop", 1, n_datasets=1, starts=3, seed=0), workers=1)
    assert len(table) == 3
    bad = [r for r in table.rows if r["error"]]
    assert len(bad) == 1 and "boom" in bad[0]["error"] and bad[0]["termination"] == "error"
    assert table.aggregates()[0]["failures"] == 1
    assert np.isfinite(table.aggregates()[0]["best_value"])


def test_export_errors(tmp_path):
    with pytest.raises(ValueError):
        ResultsTable([]).export(tmp_path / "x.csv")
    t = ResultsTable([{"dataset_id": 0, "solver": "crnas", "start_id": 0, "objective": 1.0, "iterations": 1,
                       "wall_time_s": 0.1, "termination": "max_iterations", "fosp": 0.0, "sosp": 0.0, "error": None,
                       "best_iteration": 1}])
    with pytest.raises(ValueError):
        t.export(tmp_path / "x.txt", "xml")
    with pytest.raises(OSError):
        t.export(tmp_path / "missing" / "x.csv")
