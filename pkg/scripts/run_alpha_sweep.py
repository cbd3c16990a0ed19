#!/usr/bin/env python3
"""Topology sweep: how the hidden-layer split ratio affects training.

For a fixed hidden-unit budget the two-layer split is n_h2/n_h1 ~ alpha;
smaller alpha means a wider first layer and better parameter efficiency
relative to an RBM with the same budget.  Sweeps alpha for the MA method
and adds an RBM-CD baseline at the same budget.
"""

import argparse
from pathlib import Path

from modedbm.harness import (
    DatasetSpec,
    ExperimentConfig,
    resolve_shape,
    run_experiment,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-v", type=int, default=12)
    ap.add_argument("--n-h-total", type=int, default=12)
    ap.add_argument(
        "--alphas", type=float, nargs="+", default=[0.1, 0.2, 0.5, 1.0]
    )
    ap.add_argument("--updates", type=int, default=100_000)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out-dir", type=Path, default=Path("results/alpha_sweep"))
    args = ap.parse_args()

    base = dict(
        dataset=DatasetSpec(kind="shifting-bar", n_v=args.n_v),
        n_h_totals=(args.n_h_total,),
        total_updates=args.updates,
        lr_start=1.0,
        lr_end=0.001,
        batch_size=args.n_v // 2,
        ensemble_size=args.seeds,
    )
    for alpha in args.alphas:
        shape = resolve_shape(args.n_v, args.n_h_total, alpha)
        cfg = ExperimentConfig(method="MA", alpha_topo=alpha, **base)
        out = args.out_dir / f"ma_alpha_{alpha:g}"
        report = run_experiment(cfg, out_dir=out, threads=args.threads)
        print(f"MA alpha={alpha:g} shape={shape.sizes} -> {report.summary_path}")

    cfg = ExperimentConfig(method="RBM-CD", **base)
    out = args.out_dir / "rbm_cd"
    report = run_experiment(cfg, out_dir=out, threads=args.threads)
    print(f"RBM-CD shape=({args.n_v}, {args.n_h_total}) -> {report.summary_path}")


if __name__ == "__main__":
    main()
