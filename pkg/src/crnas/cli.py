"""Command line entry point: ``crnas {simulate,solve,bench,check-derivatives}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .bench import ExperimentConfig, relative_likelihood, run_experiment, sample_initial_points
from .biomodels import MODEL_KINDS, ModelSpec, as_conic_program, params_from_theta
from .datagen import DEFAULT_X0, dataset_rng, generate_dataset, load_json, range_table, save_csv, save_json
from .problem import ContractError, InfeasibleError
from .solver import SOLVERS, SolverConfig

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3

log = logging.getLogger("crnas")


def _cmd_simulate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table = range_table(args.model, args.S, args.X0)
    for i in range(args.n):
        data = generate_dataset(args.model, args.S, dataset_rng(args.seed, i), args.X0, table)
        stem = out / f"{args.model}_S{args.S}_{i:04d}"
        if args.format in ("json", "both"):
            save_json(data, stem.with_suffix(".json"))
        if args.format in ("csv", "both"):
            save_csv(data, stem.with_suffix(".csv"))
    print(f"wrote {args.n} dataset(s) to {out}")
    return EXIT_OK


def _cmd_solve(args) -> int:
    cfg = SolverConfig(
        M0=args.M0, alpha=args.alpha, eta=args.eta, epsilon=args.epsilon, max_iter=args.max_iter
    )
    if args.data:
        data = load_json(args.data)
        if (data.model, data.S) != (args.model, args.S):
            raise ContractError(f"dataset is {data.model} S={data.S}, not {args.model} S={args.S}")
    else:
        data = generate_dataset(args.model, args.S, dataset_rng(args.seed, 0), args.X0)
    table = range_table(args.model, args.S, data.X0)
    spec = ModelSpec(args.model, args.S, data.X0)
    program = as_conic_program(spec, data, table.opt)
    starts = sample_initial_points(table, program, args.starts, np.random.default_rng([args.seed, 1]))
    best = None
    for theta0 in starts:
        rep = SOLVERS[args.solver](program, theta0, cfg)
        if best is None or rep.best_objective < best.best_objective:
            best = rep
    out = {
        "model": args.model,
        "S": args.S,
        "solver": args.solver,
        "starts": args.starts,
        "objective": best.best_objective,
        "iterations": best.iterations,
        "termination": best.termination,
        "fosp": best.fosp,
        "sosp": best.sosp,
        "params": params_from_theta(spec, program, best.best_theta),
    }
    if data.true_params is not None:
        out["true_params"] = data.true_params
        if args.model == "lbd":
            out["relative_likelihood"] = relative_likelihood(out["params"], data.true_params, data)
    print(json.dumps(out, indent=1))
    return EXIT_OK


def _cmd_bench(args) -> int:
    cfg = ExperimentConfig.from_json(args.config)
    if args.out:
        cfg.output_dir = args.out
    table = run_experiment(cfg)
    for agg in table.aggregates():
        extra = f" RL={agg['relative_likelihood']:.6f}" if "relative_likelihood" in agg else ""
        print(
            f"dataset {agg['dataset_id']:4d} {agg['solver']:6s} best={agg['best_value']:.6e} "
            f"iters_to_best={agg['iterations_to_best']} time={agg['total_time']:.2f}s{extra}"
        )
    if cfg.output_dir:
        print(f"results written to {cfg.output_dir}")
    return EXIT_OK


def _cmd_check(args) -> int:
    from .derivcheck import check_all

    reports = check_all(points=args.points, seed=args.seed, S=args.S)
    for r in reports:
        print(r.line())
    return EXIT_OK if all(r.ok for r in reports) else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="crnas", description="Affine-scaling cubic Newton parameter estimation")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate synthetic datasets")
    sim.add_argument("--model", choices=MODEL_KINDS, required=True)
    sim.add_argument("--S", type=int, default=1)
    sim.add_argument("--n", type=int, default=1, help="number of datasets")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--X0", type=float, default=DEFAULT_X0)
    sim.add_argument("--format", choices=("json", "csv", "both"), default="json")
    sim.add_argument("--out", default="datasets")
    sim.set_defaults(func=_cmd_simulate)

    sol = sub.add_parser("solve", help="multi-start solve of one dataset")
    sol.add_argument("--model", choices=MODEL_KINDS, required=True)
    sol.add_argument("--S", type=int, default=1)
    sol.add_argument("--solver", choices=sorted(SOLVERS), default="crnas")
    sol.add_argument("--alpha", type=float, default=0.5)
    sol.add_argument("--M0", type=float, default=1.0)
    sol.add_argument("--eta", type=float, default=1e-8)
    sol.add_argument("--epsilon", type=float, default=1e-6)
    sol.add_argument("--max-iter", dest="max_iter", type=int, default=500)
    sol.add_argument("--seed", type=int, default=0)
    sol.add_argument("--starts", type=int, default=1)
    sol.add_argument("--X0", type=float, default=DEFAULT_X0)
    sol.add_argument("--data", help="dataset JSON (generated from --seed when omitted)")
    sol.set_defaults(func=_cmd_solve)

    bn = sub.add_parser("bench", help="run a multi-start experiment")
    bn.add_argument("--config", required=True, help="ExperimentConfig JSON file")
    bn.add_argument("--out", help="override output_dir")
    bn.set_defaults(func=_cmd_bench)

    ck = sub.add_parser("check-derivatives", help="finite-difference checks of all objectives")
    ck.add_argument("--points", type=int, default=100)
    ck.add_argument("--S", type=int, default=2)
    ck.add_argument("--seed", type=int, default=0)
    ck.set_defaults(func=_cmd_check)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with 2
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ContractError, ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
