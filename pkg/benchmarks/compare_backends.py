"""Time the jitted kernel against the pure-numpy fallback on one setup.

Usage: python benchmarks/compare_backends.py [--dim 100] [--chains 64]
       [--iters 20000] [--lambda 0.001]

Both backends consume identical noise streams; the script also reports the
largest archive discrepancy so speed never hides a semantic drift.
"""
from __future__ import annotations

import argparse
import os
import time

import numpy as np

from langtame.potentials import double_well_radial
from langtame.sampler import InitSpec, RunConfig, run
from langtame.taming import DriftScheme


def timed_run(backend: str, spec, scheme, config):
    os.environ["LANGTAME_BACKEND"] = backend
    # one throwaway pass so numba's compile time is not billed to the kernel
    warm = RunConfig(n_chains=2, n_iters=10, lam=config.lam,
                     init=config.init, seed=config.seed)
    run(spec, scheme, warm)
    t0 = time.perf_counter()
    res = run(spec, scheme, config)
    return time.perf_counter() - t0, res


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dim", type=int, default=100)
    ap.add_argument("--chains", type=int, default=64)
    ap.add_argument("--iters", type=int, default=20_000)
    ap.add_argument("--lambda", dest="lam", type=float, default=0.001)
    args = ap.parse_args()

    spec = double_well_radial(args.dim)
    scheme = DriftScheme("wd_tula")
    config = RunConfig(
        n_chains=args.chains, n_iters=args.iters, lam=args.lam,
        init=InitSpec.constant(0.0), seed=20240817,
        burn_in=args.iters // 2, thinning=max(1, args.iters // 100),
    )

    rows = []
    results = {}
    for backend in ("numba", "numpy"):
        try:
            dt, res = timed_run(backend, spec, scheme, config)
        except RuntimeError as e:
            print(f"{backend:>6}: unavailable ({e})")
            continue
        steps = args.chains * args.iters
        rows.append((backend, dt, steps / dt / 1e6))
        results[backend] = res

    print(f"\nwd_tula on double_well_radial({args.dim}), "
          f"{args.chains} chains x {args.iters} iters, lambda={args.lam}")
    print(f"{'backend':>8} {'seconds':>10} {'Msteps/s':>10}")
    for backend, dt, rate in rows:
        print(f"{backend:>8} {dt:>10.3f} {rate:>10.2f}")
    if len(results) == 2:
        diff = float(np.max(np.abs(
            results["numba"].archive - results["numpy"].archive
        )))
        print(f"max archive |numba - numpy| = {diff:.3e}")


if __name__ == "__main__":
    main()
