"""Barycenter sweep on synthetic stroke images: x/Ave and normalized objective per fraction.

    python scripts/barycenter_sweep.py --seeds 10 --out runs/barycenter
    python scripts/barycenter_sweep.py --images path/to/pgm_dir --seeds 3
"""
import argparse
from pathlib import Path

import numpy as np

from protoset.harness.experiment import ExperimentConfig, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--n", type=int, default=300)
    ap.add_argument("--k", type=int, default=30)
    ap.add_argument("--images", type=Path, default=None, help="directory of .pgm files instead of synthetic blobs")
    ap.add_argument("--metric", choices=["emd1", "emd2"], default="emd2")
    ap.add_argument("--fractions", type=float, nargs="+", default=[0.05, 0.1, 0.2, 0.3])
    ap.add_argument("--out", type=Path, default=Path("runs/barycenter"))
    args = ap.parse_args()

    if args.images is not None:
        dataset = {"kind": "images", "path": str(args.images), "k": args.k}
    else:
        dataset = {"kind": "blobs", "n": args.n, "k": args.k}
    table = []
    for seed in range(args.seeds):
        cfg = ExperimentConfig(seed=seed, dataset=dataset, metric=args.metric, fractions=args.fractions,
                               output=str(args.out / f"seed{seed}.csv"))
        res = run_experiment(cfg)
        table.append([(r.normalized_objective, r.normalized_time, r.ground_truth_metric) for r in res.rows])
        print(f"seed {seed}: baseline objective {res.rows[0].objective:.6g}", flush=True)
    table = np.array(table)
    print(f"{'fraction':>8} {'norm_obj':>9} {'norm_time':>9} {'x/Ave':>7}")
    for j, frac in enumerate([1.0] + sorted(args.fractions)):
        med = np.median(table[:, j], axis=0)
        print(f"{frac:>8.2f} {med[0]:>9.3f} {med[1]:>9.3f} {med[2]:>7.3f}")


if __name__ == "__main__":
    main()
