#!/usr/bin/env python3
"""Time the numba and numpy RK4 kernels on the bundled three-agent closed loop.

Usage: python benchmarks/bench_rk4.py [--runs 5] [--t-end 30] [--h 1e-3] [--json]
"""

import argparse
import json
import time

import numpy as np

from dobcoord import kernels, paper_example, synthesize
from dobcoord.sim import assemble, integrate


def time_runs(func, runs):
    func()  # warm-up (includes numba compilation)
    times = []
    for _ in range(runs):
        start = time.perf_counter()
        func()
        times.append(time.perf_counter() - start)
    return {"min": min(times), "mean": sum(times) / len(times), "max": max(times)}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--runs", type=int, default=5)
    ap.add_argument("--t-end", type=float, default=30.0)
    ap.add_argument("--h", type=float, default=1e-3)
    ap.add_argument("--json", action="store_true", help="print machine-readable results")
    args = ap.parse_args()

    sc = paper_example()
    gains = synthesize(sc.agents, sc.disturbances, sc.leader, sc.graphs, sc.overrides)
    results = {}
    finals = {}
    for law in ("full-order", "reduced-order"):
        sys = assemble(sc.agents, sc.disturbances, sc.leader, sc.schedule, gains, law, sc.initial_conditions())
        for backend, flag in (("numpy", False), ("numba", True)):
            if flag and kernels.rk4_linear_numba is None:
                continue
            results[f"{law}/{backend}"] = time_runs(lambda: integrate(sys, args.t_end, args.h, use_numba=flag),
                                                    args.runs)
            finals[(law, backend)] = integrate(sys, args.t_end, args.h, use_numba=flag).states[-1]
        if (law, "numba") in finals:
            diff = float(np.max(np.abs(finals[(law, "numba")] - finals[(law, "numpy")])))
            results[f"{law}/max-diff"] = diff

    if args.json:
        print(json.dumps(results, indent=2))
        return
    steps = int(round(args.t_end / args.h))
    print(f"{steps} RK4 steps per run, best of {args.runs}")
    for key, val in results.items():
        if key.endswith("max-diff"):
            print(f"  {key:<26} {val:.2e}")
        else:
            print(f"  {key:<26} {val['min'] * 1e3:8.1f} ms  ({steps / val['min'] / 1e6:.2f} Msteps/s)")


if __name__ == "__main__":
    main()
