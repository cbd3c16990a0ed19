#!/usr/bin/env python3
"""One-epoch smoke run on binarized MNIST digits.

Trains the (784, 120, 18) model with mode-assisted updates for one pass
over the images, then compares the AIS-estimated average log-likelihood
against the freshly initialized model.  Expects the standard IDX image
file (train-images-idx3-ubyte, optionally gzipped); pass it via --images
or the MODEDBM_MNIST environment variable.
"""

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from modedbm.data import binarize, load_idx
from modedbm.likelihood import ais_avg_ll, ais_log_z
from modedbm.model import LayerShape
from modedbm.training import TrainConfig, init_params, train


def ais_eval(params, dataset, runs, intermediate, seed):
    est = ais_log_z(params, intermediate, runs, np.random.default_rng(seed))
    return ais_avg_ll(params, dataset, est), est.log_z


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--images", type=Path, default=os.environ.get("MODEDBM_MNIST"))
    ap.add_argument("--epochs", type=int, default=1)
    ap.add_argument("--batch-size", type=int, default=100)
    ap.add_argument("--eval-limit", type=int, default=500,
                    help="rows used for the likelihood average")
    ap.add_argument("--ais-runs", type=int, default=100)
    ap.add_argument("--ais-intermediate", type=int, default=29_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out-dir", type=Path, default=Path("results/mnist_smoke"))
    args = ap.parse_args()
    if not args.images:
        sys.exit("no image file: pass --images or set MODEDBM_MNIST")

    dataset = binarize(load_idx(args.images))
    eval_set = dataset.subset(args.eval_limit)
    updates_per_epoch = -(-len(dataset) // args.batch_size)
    config = TrainConfig(
        shape=LayerShape((784, 120, 18)),
        total_updates=args.epochs * updates_per_epoch,
        lr_start=1.0,
        lr_end=0.001,
        batch_size=args.batch_size,
        p_max=0.1,
        eval_ll="none",
        seed=args.seed,
    )

    start = init_params(config.shape, np.random.default_rng(args.seed),
                        config.weight_scale)
    ll_init, _ = ais_eval(start, eval_set, args.ais_runs,
                          args.ais_intermediate, args.seed + 1)
    print(f"init avg LL (AIS): {ll_init:.3f}")

    t0 = time.perf_counter()
    params, trace = train(config, dataset)
    wall = time.perf_counter() - t0
    print(f"trained {config.total_updates} updates in {wall:.0f}s, "
          f"mode updates: {trace.mode_updates}")

    ll_final, log_z = ais_eval(params, eval_set, args.ais_runs,
                               args.ais_intermediate, args.seed + 2)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    params.save(args.out_dir / "model.json")
    trace.write_csv(args.out_dir / "trace.csv")
    summary = {
        "avg_ll_init": ll_init,
        "avg_ll_final": ll_final,
        "improvement": ll_final - ll_init,
        "log_z": log_z,
        "mode_updates": trace.mode_updates,
        "train_seconds": wall,
    }
    (args.out_dir / "summary.json").write_text(json.dumps(summary, indent=2))
    print(json.dumps(summary))


if __name__ == "__main__":
    main()
