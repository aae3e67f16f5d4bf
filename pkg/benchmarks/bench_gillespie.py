"""Time the numba and numpy birth-death kernels on the same workload.

Usage: python benchmarks/bench_gillespie.py [--runs 2000] [--repeat 5]

The workload is one LBD-sized batch: ``runs`` independent trajectories from
1000 cells to t = 36 with rates typical of the synthetic datasets.
"""
import argparse
import time

import numpy as np

from crnas import _kernels as K


def timeit(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--runs", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--birth", type=float, default=0.55)
    ap.add_argument("--death", type=float, default=0.5)
    ap.add_argument("--t-end", type=float, default=36.0)
    args = ap.parse_args()

    x0 = np.full(args.runs, 1000, dtype=np.int64)
    t_end = np.full(args.runs, args.t_end)
    mean = 1000 * np.exp((args.birth - args.death) * args.t_end)
    print(f"{args.runs} runs, birth={args.birth} death={args.death} t={args.t_end}, analytic mean {mean:.1f}")

    rows = []
    if K.HAVE_NUMBA:
        K.bd_endpoints(x0[:2], args.birth, args.death, t_end[:2], 0, use_numba=True)  # compile
        t_nb, out_nb = timeit(lambda: K.bd_endpoints(x0, args.birth, args.death, t_end, 1, use_numba=True), args.repeat)
        rows.append(("numba", t_nb, out_nb.mean()))
    t_np, out_np = timeit(lambda: K.bd_endpoints(x0, args.birth, args.death, t_end, 1, use_numba=False), args.repeat)
    rows.append(("numpy", t_np, out_np.mean()))

    for name, t, m in rows:
        print(f"{name:6s} best of {args.repeat}: {t * 1e3:9.1f} ms   sample mean {m:.1f}")
    if len(rows) == 2:
        print(f"speedup numba/numpy: {rows[1][1] / rows[0][1]:.1f}x")


if __name__ == "__main__":
    main()
