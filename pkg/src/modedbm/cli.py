"""Command-line entry points.

Subcommands: generate-data, train, eval, ais, experiment, aggregate.
Global flags (--seed, --config, --out-dir, --threads) are accepted by every
subcommand; when both a config file and a flag set the same knob, the flag
wins.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .data import load_bitstrings, load_idx, binarize, save_bitstrings, shifting_bar
from .harness import (
    ExperimentConfig,
    SUMMARY_COLUMNS,
    read_runs_csv,
    run_experiment,
    summarize,
    write_csv,
)
from .likelihood import (
    CapacityError,
    ais_avg_ll,
    ais_log_z,
    exact_log_z,
    log_z_stderr,
    unnormalized_log_marginals,
)
from .model import DbmParams, LayerShape
from .training import TrainConfig, train


def _add_common(parser):
    parser.add_argument("--seed", type=int, default=None, help="base random seed")
    parser.add_argument(
        "--config", type=Path, default=None, help="JSON file with option defaults"
    )
    parser.add_argument(
        "--out-dir", type=Path, default=Path("."), help="directory for outputs"
    )
    parser.add_argument("--threads", type=int, default=1, help="worker processes")


def _load_config(args) -> dict:
    if args.config is None:
        return {}
    cfg = json.loads(Path(args.config).read_text())
    if not isinstance(cfg, dict):
        raise ValueError(f"{args.config}: config must be a JSON object")
    return cfg


def _option(args, cfg, name, default):
    """Flag value if given, else config value, else default."""
    value = getattr(args, name.replace("-", "_"))
    if value is not None:
        return value
    if name in cfg:
        return cfg[name]
    return default


def _parse_shape(text) -> LayerShape:
    if isinstance(text, (list, tuple)):
        return LayerShape(tuple(int(x) for x in text))
    return LayerShape(tuple(int(x) for x in str(text).split(",")))


def cmd_generate_data(args) -> int:
    cfg = _load_config(args)
    kind = _option(args, cfg, "kind", "shifting-bar")
    out = args.out or args.out_dir / "data.txt"
    if kind == "shifting-bar":
        n_v = int(_option(args, cfg, "n-v", 12))
        bar_len = _option(args, cfg, "bar-len", None)
        bar_len = n_v // 2 if bar_len is None else int(bar_len)
        ds = shifting_bar(n_v, bar_len)
    elif kind == "idx":
        images = _option(args, cfg, "images", None)
        if not images:
            raise ValueError("generate-data --kind idx needs --images")
        ds = binarize(load_idx(images), int(_option(args, cfg, "threshold", 128)))
    else:
        raise ValueError(f"unknown dataset kind {kind!r}")
    limit = _option(args, cfg, "limit", None)
    if limit is not None:
        ds = ds.subset(int(limit))
    out.parent.mkdir(parents=True, exist_ok=True)
    save_bitstrings(ds, out)
    print(f"wrote {len(ds)} x {ds.n_visible} bits to {out}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args)
    data_path = _option(args, cfg, "data", None)
    shape_arg = _option(args, cfg, "shape", None)
    if data_path is None or shape_arg is None:
        raise ValueError("train needs --data and --shape")
    dataset = load_bitstrings(data_path)
    shape = _parse_shape(shape_arg)
    config = TrainConfig(
        shape=shape,
        total_updates=int(_option(args, cfg, "updates", 10_000)),
        lr_start=float(_option(args, cfg, "lr-start", 1.0)),
        lr_end=float(_option(args, cfg, "lr-end", 0.001)),
        batch_size=_option(args, cfg, "batch-size", None),
        cd_k=int(_option(args, cfg, "cd-k", 1)),
        p_max=float(_option(args, cfg, "p-max", 0.1)),
        mode_solver=_option(args, cfg, "mode-solver", "auto"),
        eval_every=int(_option(args, cfg, "eval-every", 0)),
        eval_ll=_option(args, cfg, "eval-ll", "auto"),
        seed=args.seed if args.seed is not None else int(cfg.get("seed", 0)),
    )
    params, trace = train(config, dataset)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    checkpoint = args.checkpoint or args.out_dir / "model.json"
    trace_path = args.trace or args.out_dir / "trace.csv"
    params.save(checkpoint)
    trace.write_csv(trace_path)
    last = trace.records[-1]
    print(
        f"trained {config.total_updates} updates, "
        f"final avg_ll={last.avg_ll} ({last.ll_kind}), "
        f"mode updates={last.mode_updates_so_far}; "
        f"model -> {checkpoint}, trace -> {trace_path}"
    )
    return 0


def _eval_payload(params, dataset, ll_mode, ais_runs, ais_intermediate, seed):
    if ll_mode in ("auto", "exact"):
        try:
            est = exact_log_z(params)
        except CapacityError:
            if ll_mode == "exact":
                raise
            est = None
    else:
        est = None
    if est is None:
        rng = np.random.default_rng(seed)
        est = ais_log_z(params, ais_intermediate, ais_runs, rng)
    avg_ll = None
    if dataset is not None:
        marg = unnormalized_log_marginals(params, dataset.vectors.astype(np.float64))
        avg_ll = float(marg.mean() - est.log_z)
    return {
        "log_z": est.log_z,
        "exact": est.exact,
        "avg_ll": avg_ll,
        "n_runs": est.n_runs,
        "n_intermediate": est.n_intermediate,
    }


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    model_path = _option(args, cfg, "model", None)
    if model_path is None:
        raise ValueError("eval needs --model")
    params = DbmParams.load(model_path)
    data_path = _option(args, cfg, "data", None)
    dataset = load_bitstrings(data_path) if data_path else None
    limit = _option(args, cfg, "limit", None)
    if dataset is not None and limit is not None:
        dataset = dataset.subset(int(limit))
    payload = _eval_payload(
        params,
        dataset,
        _option(args, cfg, "ll", "auto"),
        int(_option(args, cfg, "ais-runs", 100)),
        int(_option(args, cfg, "ais-intermediate", 1000)),
        args.seed if args.seed is not None else int(cfg.get("seed", 0)),
    )
    print(json.dumps(payload))
    return 0


def cmd_ais(args) -> int:
    cfg = _load_config(args)
    model_path = _option(args, cfg, "model", None)
    if model_path is None:
        raise ValueError("ais needs --model")
    params = DbmParams.load(model_path)
    rng = np.random.default_rng(args.seed if args.seed is not None else int(cfg.get("seed", 0)))
    est = ais_log_z(
        params,
        int(_option(args, cfg, "intermediate", 1000)),
        int(_option(args, cfg, "runs", 100)),
        rng,
    )
    print(
        json.dumps(
            {
                "log_z": est.log_z,
                "exact": est.exact,
                "n_runs": est.n_runs,
                "n_intermediate": est.n_intermediate,
                "log_z_stderr": log_z_stderr(est),
            }
        )
    )
    return 0


def cmd_experiment(args) -> int:
    if args.config is None:
        raise ValueError("experiment needs --config")
    config = ExperimentConfig.from_json_file(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed_base"] = args.seed
    if args.method is not None:
        overrides["method"] = args.method
    if args.ensemble_size is not None:
        overrides["ensemble_size"] = args.ensemble_size
    if args.updates is not None:
        overrides["total_updates"] = args.updates
    if overrides:
        config = config.replace(**overrides)
    report = run_experiment(config, out_dir=args.out_dir, threads=args.threads)
    n_err = sum(1 for r in report.rows if r["ll_kind"] == "error")
    print(
        f"{len(report.rows)} runs ({n_err} failed); "
        f"runs -> {report.runs_path}, summary -> {report.summary_path}"
    )
    return 0 if report.all_ok else 1


def cmd_aggregate(args) -> int:
    runs_path = args.runs or args.out_dir / "runs.csv"
    out_path = args.out or args.out_dir / "summary.csv"
    rows = read_runs_csv(runs_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_csv(out_path, SUMMARY_COLUMNS, summarize(rows))
    print(f"aggregated {len(rows)} runs -> {out_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modedbm",
        description="Train and evaluate layered binary Boltzmann machines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-data", help="write a binary dataset as bit strings")
    _add_common(p)
    p.add_argument("--kind", choices=["shifting-bar", "idx"], default=None)
    p.add_argument("--n-v", type=int, default=None, help="ring width")
    p.add_argument("--bar-len", type=int, default=None, help="bar width, default n_v/2")
    p.add_argument("--images", type=Path, default=None, help="IDX image file")
    p.add_argument("--threshold", type=int, default=None, help="binarization cutoff")
    p.add_argument("--limit", type=int, default=None, help="keep the first N rows")
    p.add_argument("--out", type=Path, default=None, help="output file")
    p.set_defaults(func=cmd_generate_data)

    p = sub.add_parser("train", help="train one model")
    _add_common(p)
    p.add_argument("--data", type=Path, default=None, help="bit-string dataset")
    p.add_argument("--shape", type=str, default=None, help="layer widths, e.g. 12,10,2")
    p.add_argument("--updates", type=int, default=None)
    p.add_argument("--lr-start", type=float, default=None)
    p.add_argument("--lr-end", type=float, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--cd-k", type=int, default=None)
    p.add_argument("--p-max", type=float, default=None, help="mode-update ceiling")
    p.add_argument("--mode-solver", choices=["auto", "exact", "anneal"], default=None)
    p.add_argument("--eval-every", type=int, default=None)
    p.add_argument("--eval-ll", choices=["auto", "exact", "ais", "none"], default=None)
    p.add_argument("--checkpoint", type=Path, default=None)
    p.add_argument("--trace", type=Path, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="log partition function and data likelihood")
    _add_common(p)
    p.add_argument("--model", type=Path, default=None, help="model checkpoint")
    p.add_argument("--data", type=Path, default=None, help="bit-string dataset")
    p.add_argument("--ll", choices=["auto", "exact", "ais"], default=None)
    p.add_argument("--ais-runs", type=int, default=None)
    p.add_argument("--ais-intermediate", type=int, default=None)
    p.add_argument("--limit", type=int, default=None, help="evaluate on first N rows")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ais", help="annealed importance sampling estimate of ln Z")
    _add_common(p)
    p.add_argument("--model", type=Path, default=None, help="model checkpoint")
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--intermediate", type=int, default=None)
    p.set_defaults(func=cmd_ais)

    p = sub.add_parser("experiment", help="run a sweep x ensemble grid from a config")
    _add_common(p)
    p.add_argument("--method", choices=["MA", "CD", "RBM-CD"], default=None)
    p.add_argument("--ensemble-size", type=int, default=None)
    p.add_argument("--updates", type=int, default=None)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("aggregate", help="rebuild summary.csv from runs.csv")
    _add_common(p)
    p.add_argument("--runs", type=Path, default=None)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_aggregate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
