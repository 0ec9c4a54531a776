"""Consensus-clustering sweep: coreset fractions 5-30% against the full-data run.

Writes one metrics CSV per seed and prints per-fraction medians.

    python scripts/ensemble_sweep.py --seeds 10 --out runs/ensemble
"""
import argparse
from pathlib import Path

import numpy as np

from protoset.harness.experiment import ExperimentConfig, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--items", type=int, default=500)
    ap.add_argument("--k", type=int, default=10)
    ap.add_argument("--dims", type=int, default=10)
    ap.add_argument("--solutions", type=int, default=200)
    ap.add_argument("--separation", type=float, default=3.0)
    ap.add_argument("--fractions", type=float, nargs="+", default=[0.05, 0.1, 0.2, 0.3])
    ap.add_argument("--jl", default="auto")
    ap.add_argument("--eps", type=float, default=0.3)
    ap.add_argument("--out", type=Path, default=Path("runs/ensemble"))
    args = ap.parse_args()

    dataset = {"kind": "ensemble", "items": args.items, "k": args.k, "dims": args.dims,
               "solutions": args.solutions, "separation": args.separation}
    table = []
    for seed in range(args.seeds):
        cfg = ExperimentConfig(seed=seed, dataset=dataset, fractions=args.fractions, jl=args.jl, eps=args.eps,
                               output=str(args.out / f"seed{seed}.csv"))
        res = run_experiment(cfg)
        table.append([(r.normalized_objective, r.normalized_time, r.ground_truth_metric) for r in res.rows])
        print(f"seed {seed}: full misclustered {res.rows[0].ground_truth_metric:.1f}%", flush=True)
    table = np.array(table)
    print(f"{'fraction':>8} {'norm_obj':>9} {'norm_time':>9} {'miscl_%':>8}")
    for j, frac in enumerate([1.0] + sorted(args.fractions)):
        med = np.median(table[:, j], axis=0)
        print(f"{frac:>8.2f} {med[0]:>9.3f} {med[1]:>9.3f} {med[2]:>8.1f}")


if __name__ == "__main__":
    main()
