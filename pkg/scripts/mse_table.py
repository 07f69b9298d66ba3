"""Median MSE table for the simulation design (coefficient functions x contamination).

    python3 scripts/mse_table.py --reps 100 --out results/mse_table

Every cell is a `run_study` call; reports land in OUT/beta{b}_eps{e}/.
Full scale is --reps 1000 --bootstrap 10000 (hours on one core).
"""

import argparse
import os
import time

from dpdlogit.simulation import ESTIMATORS, StudyConfig, default_workers, run_study


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--betas", default="1,2,3")
    ap.add_argument("--eps", default="0,0.01,0.02,0.05")
    ap.add_argument("--reps", type=int, default=100)
    ap.add_argument("--n", type=int, default=400)
    ap.add_argument("--bootstrap", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--workers", type=int, default=default_workers())
    ap.add_argument("--out", default="results/mse_table")
    args = ap.parse_args()

    betas = [int(b) for b in args.betas.split(",")]
    epsilons = [float(e) for e in args.eps.split(",")]
    print(f"{'':10s}" + "".join(f"{e:>20s}" for e in ESTIMATORS))
    for b in betas:
        for eps in epsilons:
            cfg = StudyConfig(beta_index=b, epsilon=eps, n=args.n, replications=args.reps,
                              seed=args.seed + 100 * b + int(1000 * eps),
                              bootstrap_resamples=args.bootstrap)
            t0 = time.perf_counter()
            rep = run_study(cfg, workers=args.workers)
            rep.write(os.path.join(args.out, f"beta{b}_eps{eps:g}"))
            cells = "".join(
                f"{rep.median_mse[e]:>12.3f} ({rep.bootstrap_se[e]:.3f})" for e in ESTIMATORS
            )
            print(f"b{b} e={eps:<5g}{cells}   [{time.perf_counter() - t0:.0f}s,"
                  f" {rep.failures} failed]", flush=True)


if __name__ == "__main__":
    main()
