"""Ensemble experiment runner: topology sweeps, seeds, CSV reports."""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .data import BinaryDataset, binarize, load_idx, shifting_bar
from .likelihood import ais_avg_ll, ais_log_z, exact_avg_ll
from .model import CapacityError, LayerShape
from .training import TrainConfig, train

log = logging.getLogger(__name__)

RUN_COLUMNS = (
    "method",
    "n_v",
    "n_h_total",
    "alpha_topo",
    "seed",
    "final_avg_ll",
    "ll_kind",
    "wall_seconds",
)
SUMMARY_COLUMNS = (
    "method",
    "n_v",
    "n_h_total",
    "alpha_topo",
    "n_runs",
    "median_ll",
    "p5_ll",
    "p95_ll",
)
METHODS = ("MA", "CD", "RBM-CD")


def resolve_shape(n_v: int, n_h_total: int, alpha_topo: float) -> LayerShape:
    """Split a hidden-unit budget across two layers with n_h2/n_h1 ~ alpha.

    Rounds n_h1 to the nearest integer and gives the remainder to the top
    layer; a zero top layer is bumped to one unit at n_h1's expense.
    """
    if n_h_total < 2:
        raise ValueError(f"need at least 2 hidden units to split, got {n_h_total}")
    if alpha_topo < 0:
        raise ValueError(f"alpha_topo must be non-negative, got {alpha_topo}")
    n_h1 = int(n_h_total / (1.0 + alpha_topo) + 0.5)
    n_h2 = n_h_total - n_h1
    if n_h2 < 1:
        n_h2 = 1
        n_h1 = n_h_total - 1
    if n_h1 < 1:
        raise ValueError(f"cannot split {n_h_total} hidden units with alpha {alpha_topo}")
    return LayerShape((n_v, n_h1, n_h2))


def aggregate(values) -> tuple[float, float, float]:
    """Median with nearest-rank 5th and 95th percentiles."""
    vals = sorted(float(v) for v in values)
    n = len(vals)
    if n == 0:
        raise ValueError("cannot aggregate an empty collection")
    median = (vals[(n - 1) // 2] + vals[n // 2]) / 2.0
    rank_lo = max(1, (5 * n + 99) // 100)
    rank_hi = (95 * n + 99) // 100
    return median, vals[rank_lo - 1], vals[rank_hi - 1]


@dataclass(frozen=True)
class DatasetSpec:
    """Recipe for the training data, JSON friendly."""

    kind: str
    n_v: int | None = None
    bar_len: int | None = None
    images: str | None = None
    threshold: int = 128
    limit: int | None = None

    def __post_init__(self):
        if self.kind not in ("shifting-bar", "idx"):
            raise ValueError(f"unknown dataset kind {self.kind!r}")
        if self.kind == "shifting-bar" and self.n_v is None:
            raise ValueError("shifting-bar needs n_v")
        if self.kind == "idx" and not self.images:
            raise ValueError("idx needs an images path")

    def build(self) -> BinaryDataset:
        if self.kind == "shifting-bar":
            bar = self.bar_len if self.bar_len is not None else self.n_v // 2
            ds = shifting_bar(self.n_v, bar)
        else:
            ds = binarize(load_idx(self.images), self.threshold)
        return ds.subset(self.limit)


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep of runs: a method, hidden budgets, and an ensemble of seeds."""

    dataset: DatasetSpec
    method: str
    n_h_totals: tuple[int, ...]
    alpha_topo: float = 0.2
    total_updates: int = 10_000
    lr_start: float = 1.0
    lr_end: float = 0.001
    batch_size: int | None = None
    cd_k: int = 1
    p_max: float | None = None
    mode_solver: str = "auto"
    ensemble_size: int = 1
    seed_base: int = 0
    ais_runs: int = 100
    ais_intermediate: int = 1000
    eval_limit: int | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if not self.n_h_totals:
            raise ValueError("n_h_totals must not be empty")
        object.__setattr__(self, "n_h_totals", tuple(int(n) for n in self.n_h_totals))
        if self.ensemble_size < 1:
            raise ValueError("ensemble_size must be positive")

    @classmethod
    def from_json_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "dataset" not in d or "method" not in d or "n_h_totals" not in d:
            raise ValueError("config needs at least dataset, method, n_h_totals")
        kwargs = dict(d)
        kwargs["dataset"] = DatasetSpec(**d["dataset"])
        kwargs["n_h_totals"] = tuple(d["n_h_totals"])
        return cls(**kwargs)

    @classmethod
    def from_json_file(cls, path) -> "ExperimentConfig":
        return cls.from_json_dict(json.loads(Path(path).read_text()))

    def replace(self, **kwargs) -> "ExperimentConfig":
        import dataclasses

        return dataclasses.replace(self, **kwargs)


@dataclass(frozen=True)
class ExperimentReport:
    rows: tuple[dict, ...]
    runs_path: Path
    summary_path: Path
    all_ok: bool


def _model_shape(config: ExperimentConfig, n_v: int, n_h_total: int) -> LayerShape:
    if config.method == "RBM-CD":
        return LayerShape((n_v, n_h_total))
    return resolve_shape(n_v, n_h_total, config.alpha_topo)


def _final_avg_ll(params, dataset, config, seed):
    try:
        return exact_avg_ll(params, dataset), "exact"
    except CapacityError:
        rng = np.random.default_rng([seed, 1])
        est = ais_log_z(params, config.ais_intermediate, config.ais_runs, rng)
        return ais_avg_ll(params, dataset, est), "ais"


def run_one(config: ExperimentConfig, n_h_total: int, seed: int) -> dict:
    """Train one model and evaluate its final average log-likelihood."""
    started = time.perf_counter()
    dataset = config.dataset.build()
    row = {
        "method": config.method,
        "n_v": dataset.n_visible,
        "n_h_total": n_h_total,
        "alpha_topo": config.alpha_topo if config.method != "RBM-CD" else 0.0,
        "seed": seed,
        "final_avg_ll": float("nan"),
        "ll_kind": "error",
        "wall_seconds": 0.0,
    }
    try:
        shape = _model_shape(config, dataset.n_visible, n_h_total)
        p_max = config.p_max
        if p_max is None:
            p_max = 0.1 if config.method == "MA" else 0.0
        train_config = TrainConfig(
            shape=shape,
            total_updates=config.total_updates,
            lr_start=config.lr_start,
            lr_end=config.lr_end,
            batch_size=config.batch_size,
            cd_k=config.cd_k,
            p_max=p_max,
            mode_solver=config.mode_solver,
            eval_every=0,
            eval_ll="none",
            seed=seed,
        )
        params, _ = train(train_config, dataset)
        ll, kind = _final_avg_ll(params, dataset.subset(config.eval_limit), config, seed)
        row["final_avg_ll"] = ll
        row["ll_kind"] = kind
    except Exception:
        log.exception(
            "run failed: method=%s n_h_total=%s seed=%s", config.method, n_h_total, seed
        )
    row["wall_seconds"] = time.perf_counter() - started
    return row


def _run_payload(payload):
    config, n_h_total, seed = payload
    return run_one(config, n_h_total, seed)


def summarize(rows) -> list[dict]:
    """Per sweep point: median and percentile band over successful runs."""
    groups: dict[tuple, list] = {}
    order = []
    for row in rows:
        key = (row["method"], row["n_v"], row["n_h_total"], row["alpha_topo"])
        if key not in groups:
            groups[key] = []
            order.append(key)
        if row["ll_kind"] != "error":
            groups[key].append(float(row["final_avg_ll"]))
    out = []
    for key in order:
        vals = groups[key]
        if vals:
            median, p5, p95 = aggregate(vals)
        else:
            median = p5 = p95 = float("nan")
        out.append(
            {
                "method": key[0],
                "n_v": key[1],
                "n_h_total": key[2],
                "alpha_topo": key[3],
                "n_runs": len(vals),
                "median_ll": median,
                "p5_ll": p5,
                "p95_ll": p95,
            }
        )
    return out


def _format(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format(row[c]) for c in columns])


def read_runs_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for raw in reader:
            rows.append(
                {
                    "method": raw["method"],
                    "n_v": int(raw["n_v"]),
                    "n_h_total": int(raw["n_h_total"]),
                    "alpha_topo": float(raw["alpha_topo"]),
                    "seed": int(raw["seed"]),
                    "final_avg_ll": float(raw["final_avg_ll"]),
                    "ll_kind": raw["ll_kind"],
                    "wall_seconds": float(raw["wall_seconds"]),
                }
            )
    return rows


def run_experiment(
    config: ExperimentConfig, out_dir=".", threads: int = 1
) -> ExperimentReport:
    """Run the full sweep x ensemble grid and write runs.csv / summary.csv.

    Per-run seeds are seed_base + ensemble index, reused at every sweep
    point so that sweep points are seed-paired.  Row order, and therefore
    the CSV bytes apart from wall_seconds, does not depend on threads.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [
        (config, n_h, config.seed_base + e)
        for n_h in config.n_h_totals
        for e in range(config.ensemble_size)
    ]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_run_payload, jobs))
    else:
        rows = [_run_payload(j) for j in jobs]
    runs_path = out_dir / "runs.csv"
    summary_path = out_dir / "summary.csv"
    write_csv(runs_path, RUN_COLUMNS, rows)
    write_csv(summary_path, SUMMARY_COLUMNS, summarize(rows))
    all_ok = all(r["ll_kind"] != "error" for r in rows)
    return ExperimentReport(
        rows=tuple(rows), runs_path=runs_path, summary_path=summary_path, all_ok=all_ok
    )
