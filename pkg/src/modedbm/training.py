"""Joint training: contrastive-divergence updates mixed with mode updates.

Every update draws a Bernoulli decision: with probability given by the
mode schedule the gradient is formed from lowest-energy configurations
(data term with the visible layer clamped, model term free), otherwise
from mean-field data statistics and CD chain statistics.  Both kinds of
statistics feed the same ascent step on the log-likelihood surrogate
eps * (data_term - model_term).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from .gibbs import PairStatistics, cd_statistics, data_statistics
from .likelihood import ais_avg_ll, ais_log_z, exact_avg_ll
from .meanfield import mf_fixed_point_batch
from .model import CapacityError, DbmParams, LayerShape
from .modes import AnnealSchedule, mode_statistics

TRACE_COLUMNS = ("update", "avg_ll", "ll_kind", "mode_updates_so_far", "lr")


@dataclass(frozen=True)
class ScheduleParams:
    """Sigmoidal ramp for the per-update mode-sampling probability.

    The probability at progress n (in epochs, fractional allowed) is
    p_max * sigmoid(alpha_sched * n + beta_sched).  The default
    alpha_sched = 20 / total_epochs makes the ramp shape invariant to run
    length: it starts near zero at n = 0 and saturates at p_max before
    the run ends.  For full-batch runs an epoch is a single update, so n
    counts updates.  The _sched suffix keeps the slope apart from the
    topology ratio alpha_topo used by the experiment harness.
    """

    total_epochs: float
    alpha_sched: float | None = None
    beta_sched: float = -6.0
    p_max: float = 0.1

    def __post_init__(self):
        if self.total_epochs < 1:
            raise ValueError(f"total_epochs must be at least 1, got {self.total_epochs}")
        if self.alpha_sched is None:
            object.__setattr__(self, "alpha_sched", 20.0 / self.total_epochs)
        if self.alpha_sched < 0:
            raise ValueError(f"alpha_sched must be non-negative, got {self.alpha_sched}")
        if not 0.0 <= self.p_max <= 1.0:
            raise ValueError(f"p_max must lie in [0, 1], got {self.p_max}")


def mode_probability(n: float, schedule: ScheduleParams) -> float:
    """Probability of taking a mode update at progress n (epochs)."""
    return schedule.p_max * float(expit(schedule.alpha_sched * n + schedule.beta_sched))


@dataclass(frozen=True)
class TrainConfig:
    """Everything a training run needs besides the data and the seed."""

    shape: LayerShape
    total_updates: int
    lr_start: float = 1.0
    lr_end: float = 0.001
    batch_size: int | None = None
    cd_k: int = 1
    p_max: float = 0.1
    schedule: ScheduleParams | None = None
    mode_solver: str = "auto"
    anneal: AnnealSchedule = field(default_factory=AnnealSchedule)
    weight_scale: float = 0.01
    eval_every: int = 0
    eval_ll: str = "auto"
    eval_ais_runs: int = 10
    eval_ais_intermediate: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.total_updates < 1:
            raise ValueError("total_updates must be positive")
        if not 0 < self.lr_end <= self.lr_start:
            raise ValueError("need 0 < lr_end <= lr_start")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.cd_k < 1:
            raise ValueError("cd_k must be positive")
        if not 0.0 <= self.p_max <= 1.0:
            raise ValueError(f"p_max must lie in [0, 1], got {self.p_max}")
        if self.eval_ll not in ("auto", "exact", "ais", "none"):
            raise ValueError(f"unknown eval_ll {self.eval_ll!r}")
        if self.mode_solver not in ("auto", "exact", "anneal"):
            raise ValueError(f"unknown mode_solver {self.mode_solver!r}")


def learning_rate(update_index: int, config: TrainConfig) -> float:
    """Linearly decayed rate; hits lr_end exactly on the last update."""
    if not 0 <= update_index < config.total_updates:
        raise ValueError(f"update index {update_index} outside the run")
    if config.total_updates == 1:
        return config.lr_start
    if update_index == config.total_updates - 1:
        return config.lr_end
    frac = update_index / (config.total_updates - 1)
    return config.lr_start + (config.lr_end - config.lr_start) * frac


def init_params(
    shape: LayerShape, rng: np.random.Generator, weight_scale: float = 0.01
) -> DbmParams:
    """Zero biases, small centered Gaussian weights."""
    sizes = shape.sizes
    return DbmParams(
        shape=shape,
        visible_bias=np.zeros(sizes[0]),
        hidden_biases=tuple(np.zeros(n) for n in sizes[1:]),
        weights=tuple(
            rng.normal(0.0, weight_scale, size=(sizes[i], sizes[i + 1]))
            for i in range(len(sizes) - 1)
        ),
    )


def gradient_step(
    params: DbmParams,
    data_stats: PairStatistics,
    model_stats: PairStatistics,
    eps: float,
) -> DbmParams:
    """One ascent step: params + eps * (data_stats - model_stats)."""
    sizes = params.shape.sizes
    for stats in (data_stats, model_stats):
        for i, w in enumerate(stats.weights):
            if w.shape != (sizes[i], sizes[i + 1]):
                raise ValueError(
                    f"statistics weights[{i}] shape {w.shape} does not match model"
                )
        for i, b in enumerate(stats.biases):
            if b.shape != (sizes[i],):
                raise ValueError(
                    f"statistics biases[{i}] shape {b.shape} does not match model"
                )
    return DbmParams(
        shape=params.shape,
        visible_bias=params.visible_bias
        + eps * (data_stats.biases[0] - model_stats.biases[0]),
        hidden_biases=tuple(
            b + eps * (d - m)
            for b, d, m in zip(
                params.hidden_biases, data_stats.biases[1:], model_stats.biases[1:]
            )
        ),
        weights=tuple(
            w + eps * (d - m)
            for w, d, m in zip(params.weights, data_stats.weights, model_stats.weights)
        ),
    )


@dataclass(frozen=True)
class TraceRecord:
    update: int
    avg_ll: float
    ll_kind: str
    mode_updates_so_far: int
    lr: float
    mf_converged_rate: float = float("nan")


@dataclass
class TrainTrace:
    """Per-evaluation log of a training run."""

    records: list[TraceRecord] = field(default_factory=list)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(TRACE_COLUMNS)
            for r in self.records:
                writer.writerow(
                    [r.update, repr(r.avg_ll), r.ll_kind, r.mode_updates_so_far, repr(r.lr)]
                )

    @property
    def mode_updates(self) -> int:
        return self.records[-1].mode_updates_so_far if self.records else 0


def _evaluate(params, dataset, kind, config, rng):
    if kind == "none":
        return float("nan"), "none"
    if kind in ("auto", "exact"):
        try:
            return exact_avg_ll(params, dataset), "exact"
        except CapacityError:
            if kind == "exact":
                raise
    est = ais_log_z(
        params, config.eval_ais_intermediate, config.eval_ais_runs, rng
    )
    return ais_avg_ll(params, dataset, est), "ais"


def train(config: TrainConfig, dataset, rng: np.random.Generator | None = None):
    """Run the update loop; returns final parameters and the trace.

    The trace records the average log-likelihood every ``eval_every``
    updates (plus the final state) together with the running count of mode
    updates, the step size, and the fraction of mean-field solves that
    converged since the previous record.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    data = dataset.vectors.astype(np.float64)
    n_data = data.shape[0]
    batch_size = config.batch_size or min(n_data, 100)
    batch_size = min(batch_size, n_data)
    updates_per_epoch = math.ceil(n_data / batch_size)
    schedule = config.schedule or ScheduleParams(
        total_epochs=max(1.0, config.total_updates / updates_per_epoch),
        p_max=config.p_max,
    )
    params = init_params(config.shape, rng, config.weight_scale)
    if config.shape.n_visible != data.shape[1]:
        raise ValueError(
            f"model expects {config.shape.n_visible} visible units, "
            f"data has {data.shape[1]}"
        )

    trace = TrainTrace()
    mode_updates = 0
    mf_solved = 0
    mf_converged = 0
    perm = np.arange(n_data)

    def record(update_idx, eps):
        nonlocal mf_solved, mf_converged
        ll, kind = _evaluate(params, dataset, config.eval_ll, config, rng)
        rate = mf_converged / mf_solved if mf_solved else float("nan")
        trace.records.append(
            TraceRecord(
                update=update_idx,
                avg_ll=ll,
                ll_kind=kind,
                mode_updates_so_far=mode_updates,
                lr=eps,
                mf_converged_rate=rate,
            )
        )
        mf_solved = 0
        mf_converged = 0

    eps = learning_rate(0, config)
    for i in range(config.total_updates):
        if batch_size >= n_data:
            batch = data
        else:
            slot = i % updates_per_epoch
            if slot == 0:
                perm = rng.permutation(n_data)
            batch = data[perm[slot * batch_size:(slot + 1) * batch_size]]
        eps = learning_rate(i, config)
        epoch = i / updates_per_epoch
        take_mode = rng.random() < mode_probability(epoch, schedule)
        if take_mode:
            d_stats, m_stats = mode_statistics(
                params, batch, solver=config.mode_solver, rng=rng, schedule=config.anneal
            )
            mode_updates += 1
        else:
            mf = mf_fixed_point_batch(params, batch, rng)
            d_stats = data_statistics(params, batch, mf.mu)
            hidden_init = [
                (rng.random(mu.shape) < mu).astype(np.float64) for mu in mf.mu
            ]
            m_stats = cd_statistics(params, batch, hidden_init, config.cd_k, rng)
            mf_solved += mf.converged.size
            mf_converged += int(mf.converged.sum())
        params = gradient_step(params, d_stats, m_stats, eps)
        if config.eval_every and (i + 1) % config.eval_every == 0:
            record(i + 1, eps)
    if not trace.records or trace.records[-1].update != config.total_updates:
        record(config.total_updates, eps)
    return params, trace
