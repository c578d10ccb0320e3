"""Spoofer vs noisy-circuit sXES over a grid of depolarizing strengths (plot-ready CSV).

Both scoring conventions for the noisy device are written: ``postselected``
(distribution over x conditioned on the top register reading 0) and ``joint``.
"""

import argparse
import csv
import sys

from mqsvt_spoof.benchmarks import P_EXP_NORMALIZATIONS, EnsembleConfig, gamma_sweep, run_ensemble


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=3)
    ap.add_argument("--du", type=int, nargs="+", default=[1, 2])
    ap.add_argument("--circuits", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--layer-set", default="all", choices=("all", "unitary"))
    ap.add_argument("--steps", type=int, default=10, help="grid 0, 1/steps, ..., 1")
    args = ap.parse_args()

    gammas = [k / args.steps for k in range(args.steps + 1)]
    w = csv.writer(sys.stdout)
    w.writerow(["d_U", "normalization", "gamma", "spoof", "spoof_stderr", "noisy", "noisy_stderr",
                "diff", "diff_stderr", "spoofer_wins", "uniform", "crossover"])
    for du in args.du:
        cfg = EnsembleConfig(n=args.n, d_U=du, circuits=args.circuits, master_seed=args.seed, workers=args.workers)
        data = run_ensemble(cfg, gammas=gammas, layer_set=args.layer_set)
        for norm in P_EXP_NORMALIZATIONS:
            res = gamma_sweep(cfg, gammas, args.layer_set, norm, data=data)
            for r in res["rows"]:
                w.writerow([du, norm, r["gamma"], r["spoof"], r["spoof_stderr"], r["noisy"], r["noisy_stderr"],
                            r["diff"], r["diff_stderr"], r["spoofer_wins"], r["uniform"], res["crossover"]])
        sys.stdout.flush()


if __name__ == "__main__":
    main()
