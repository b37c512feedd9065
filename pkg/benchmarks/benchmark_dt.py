"""Compare the jitted and pure-numpy distance-transform kernels.

Runs the same workload in two subprocesses, one per ORDSEG_NO_NUMBA setting,
so each process gets a clean import of the selected kernel path.

Usage: python3 benchmarks/benchmark_dt.py [--sizes 128,256,512] [--repeats 5]
"""

import argparse
import json
import os
import subprocess
import sys


def run_workload(sizes, repeats):
    import time

    import numpy as np

    from ordseg import _kernels

    rng = np.random.default_rng(0)
    results = []
    for n in sizes:
        grid = (rng.random((n, n)) < 0.02).astype(np.uint8)
        for name, fn in (
            ("euclidean", lambda g: _kernels.edt_sq(g)),
            ("chessboard", lambda g: _kernels.chamfer(g, True)),
            ("manhattan", lambda g: _kernels.chamfer(g, False)),
        ):
            fn(grid)  # warm-up; covers JIT compilation
            best = min(
                (lambda t0: (fn(grid), time.perf_counter() - t0)[1])(time.perf_counter())
                for _ in range(repeats)
            )
            results.append({"size": n, "metric": name, "seconds": best})
    return results


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="128,256,512")
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--inner", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()
    sizes = [int(tok) for tok in args.sizes.split(",") if tok.strip()]

    if args.inner:
        json.dump(run_workload(sizes, args.repeats), sys.stdout)
        return

    timings = {}
    for label, flag in (("numba", "0"), ("numpy", "1")):
        env = dict(os.environ, ORDSEG_NO_NUMBA=flag)
        proc = subprocess.run(
            [sys.executable, __file__, "--inner", "--sizes", args.sizes,
             "--repeats", str(args.repeats)],
            env=env,
            capture_output=True,
            text=True,
            check=True,
        )
        timings[label] = json.loads(proc.stdout)

    print(f"{'size':>6} {'metric':<11} {'numba':>10} {'numpy':>10} {'speedup':>8}")
    for jit, plain in zip(timings["numba"], timings["numpy"]):
        assert (jit["size"], jit["metric"]) == (plain["size"], plain["metric"])
        speedup = plain["seconds"] / jit["seconds"] if jit["seconds"] > 0 else float("inf")
        print(
            f"{jit['size']:>6} {jit['metric']:<11} "
            f"{jit['seconds'] * 1e3:>8.2f}ms {plain['seconds'] * 1e3:>8.2f}ms "
            f"{speedup:>7.1f}x"
        )


if __name__ == "__main__":
    main()
