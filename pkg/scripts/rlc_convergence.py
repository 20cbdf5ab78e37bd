#!/usr/bin/env python3
"""Convergence study for the RLC benchmark.

Solves the circuit on a sequence of time grids, comparing against the
closed-form solution, and reports the relative error together with the
hierarchical a-posteriori estimate at each resolution.
"""

import argparse
import csv
from pathlib import Path

from uwdae.bench import RlcParams, convergence_study, make_rlc, rlc_analytic


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--K-list", default="64,128,256,512,1024")
    ap.add_argument("--R", type=float, default=1.0)
    ap.add_argument("--L", type=float, default=1.0)
    ap.add_argument("--C", type=float, default=1.0)
    ap.add_argument("--out", type=Path, default=Path("results/rlc_convergence.csv"))
    args = ap.parse_args()

    params = RlcParams(R=args.R, L=args.L, C=args.C)
    sys = make_rlc(params)
    K_list = [int(v) for v in args.K_list.split(",")]
    rows, slope = convergence_study(sys, lambda t: rlc_analytic(params, t), K_list)

    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["K", "rel_err", "rel_est"])
        for K, err, est in rows:
            w.writerow([K, repr(float(err)), repr(float(est))])
    for K, err, est in rows:
        print(f"K={K:5d}  rel_err={err:.4e}  rel_est={est:.4e}  est/err={est/err:.4f}")
    print(f"observed convergence rate (log-log slope): {slope:.4f}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
