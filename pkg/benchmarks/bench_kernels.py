#!/usr/bin/env python3
"""Compare the numba and pure-numpy fixed-point lanes.

Runs representative solver workloads in subprocesses (the lane is
chosen at import time via ROBUSTCOV_BACKEND) and prints a timing
table.  BLAS threading strongly affects the numpy lane on small
matrices; pass --blas-threads to pin it (default 1).
"""

import argparse
import json
import os
import subprocess
import sys

_WORKER = r"""
import json, time, sys
import numpy as np
import robustcov as rc

spec = json.loads(sys.argv[1])
wT = rc.WeightFunction.tyler(K=spec["K"], t=0.1)
C = rc.toeplitz_cov(spec["N"], 0.9)
opts = rc.SolverOptions(max_iterations=500)

def solve(seed):
    ds = rc.sample_clean(C, spec["n"], seed=seed)
    if spec["rho"] == 0.0:
        return rc.maronna(ds, wT, opts)
    return rc.regularized_maronna(ds, wT, spec["rho"], opts)

solve(0)  # warm the jit cache
t0 = time.perf_counter()
iters = 0
for seed in range(spec["reps"]):
    iters += solve(seed).iterations
elapsed = (time.perf_counter() - t0) / spec["reps"]
print(json.dumps({"backend": rc.backend_name(), "ms_per_solve": elapsed * 1e3,
                  "iters": iters / spec["reps"]}))
"""


def run_case(backend: str, case: dict, blas_threads: int) -> dict:
    env = dict(os.environ)
    env["ROBUSTCOV_BACKEND"] = backend
    for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
        env[var] = str(blas_threads)
    out = subprocess.run(
        [sys.executable, "-c", _WORKER, json.dumps(case)],
        capture_output=True,
        text=True,
        env=env,
        check=True,
    )
    return json.loads(out.stdout.strip().splitlines()[-1])


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--reps", type=int, default=5, help="solves per case")
    parser.add_argument("--blas-threads", type=int, default=1)
    args = parser.parse_args()

    cases = [
        {"label": "N=50  n=200 plain     ", "N": 50, "n": 200, "K": 1.0, "rho": 0.0, "reps": args.reps},
        {"label": "N=100 n=400 plain     ", "N": 100, "n": 400, "K": 1.0, "rho": 0.0, "reps": args.reps},
        {"label": "N=150 n=100 rho=0.5   ", "N": 150, "n": 100, "K": 1.0 / 1.5, "rho": 0.5, "reps": args.reps},
        {"label": "N=300 n=200 rho=0.5   ", "N": 300, "n": 200, "K": 1.0 / 1.5, "rho": 0.5, "reps": args.reps},
    ]
    print(f"{args.reps} solves per case, BLAS threads = {args.blas_threads}\n")
    print(f"{'case':<24}{'numba ms/solve':>16}{'numpy ms/solve':>16}{'ratio':>8}")
    for case in cases:
        results = {}
        for backend in ("numba", "numpy"):
            results[backend] = run_case(backend, case, args.blas_threads)
        ratio = results["numpy"]["ms_per_solve"] / results["numba"]["ms_per_solve"]
        print(
            f"{case['label']:<24}"
            f"{results['numba']['ms_per_solve']:>16.1f}"
            f"{results['numpy']['ms_per_solve']:>16.1f}"
            f"{ratio:>8.2f}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
