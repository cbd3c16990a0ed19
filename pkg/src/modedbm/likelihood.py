"""Exact and estimated log-likelihood quantities.

The partition function of a layered model is computed by enumerating the
smaller conditional-independence class of layers and summing the other
class analytically: with one class fixed, the free class factorizes and
each unit contributes softplus(field) in the log domain.  The same trick
with only the hidden layers yields visible marginals.  Models whose
smaller class is still too wide fall back to annealed importance sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, xlogy

from .data import BinaryDataset
from .gibbs import sweep_layers
from .model import (
    ENUMERATION_LIMIT,
    CapacityError,
    DbmParams,
    enumerate_bits,
    layers_energy,
)

_CHUNK_BITS = 14


@dataclass(frozen=True)
class PartitionEstimate:
    """ln Z, either exact or an importance-sampling estimate.

    For estimates, ``run_log_weights`` keeps one log importance weight per
    annealing run and ``log_base`` is the log partition function of the
    flat starting distribution, so the estimate can be re-derived and its
    spread inspected.
    """

    log_z: float
    exact: bool
    run_log_weights: np.ndarray | None = None
    n_intermediate: int = 0
    log_base: float = 0.0

    def __post_init__(self):
        if self.exact and self.run_log_weights is not None:
            raise ValueError("an exact result carries no importance weights")
        if not self.exact and self.run_log_weights is None:
            raise ValueError("an estimate must carry its run log-weights")
        if self.run_log_weights is not None:
            object.__setattr__(
                self,
                "run_log_weights",
                np.asarray(self.run_log_weights, dtype=np.float64),
            )

    @property
    def n_runs(self) -> int:
        return 0 if self.run_log_weights is None else int(self.run_log_weights.size)


def _all_layer_classes(params: DbmParams):
    sizes = params.shape.sizes
    even = [i for i in range(len(sizes)) if i % 2 == 0]
    odd = [i for i in range(len(sizes)) if i % 2 == 1]
    n_even = sum(sizes[i] for i in even)
    n_odd = sum(sizes[i] for i in odd)
    return (even, odd) if n_even <= n_odd else (odd, even)


def _softplus(x):
    return np.logaddexp(0.0, x)


def exact_log_z(params: DbmParams) -> PartitionEstimate:
    """Exact ln Z by enumerating the smaller layer-parity class.

    Raises CapacityError when that class is wider than the enumeration
    guard.
    """
    sizes = params.shape.sizes
    enum_layers, traced_layers = _all_layer_classes(params)
    n_enum = sum(sizes[i] for i in enum_layers)
    if n_enum > ENUMERATION_LIMIT:
        raise CapacityError(
            f"smaller layer class has {n_enum} units, "
            f"exceeding the exact limit of {ENUMERATION_LIMIT}"
        )
    offsets = np.cumsum([0] + [sizes[i] for i in enum_layers])
    chunk = 1 << min(_CHUNK_BITS, n_enum)
    total_rows = 1 << n_enum
    parts = []
    for start in range(0, total_rows, chunk):
        rows = enumerate_bits(n_enum, start, min(start + chunk, total_rows))
        blocks = {
            i: rows[:, offsets[k]:offsets[k + 1]] for k, i in enumerate(enum_layers)
        }
        val = np.zeros(rows.shape[0])
        for i in enum_layers:
            val += blocks[i] @ params.bias(i)
        for t in traced_layers:
            f = params.bias(t)[None, :]
            if t - 1 in blocks:
                f = f + blocks[t - 1] @ params.weights[t - 1]
            if t + 1 in blocks:
                f = f + blocks[t + 1] @ params.weights[t].T
            val += _softplus(f).sum(axis=1)
        parts.append(logsumexp(val))
    return PartitionEstimate(log_z=float(logsumexp(parts)), exact=True)


def unnormalized_log_marginals(params: DbmParams, batch) -> np.ndarray:
    """ln sum_h exp(-E(v, h)) for each row v of the batch.

    Enumerates the smaller parity class of the hidden layers and traces the
    other, so the cost is independent of the visible width.
    """
    v = np.asarray(batch, dtype=np.float64)
    if v.ndim != 2 or v.shape[1] != params.shape.n_visible:
        raise ValueError(
            f"batch must have shape (B, {params.shape.n_visible}), got {v.shape}"
        )
    sizes = params.shape.sizes
    hidden = list(range(1, len(sizes)))
    even = [i for i in hidden if i % 2 == 0]
    odd = [i for i in hidden if i % 2 == 1]
    enum_layers, traced_layers = (
        (even, odd)
        if sum(sizes[i] for i in even) <= sum(sizes[i] for i in odd)
        else (odd, even)
    )
    n_enum = sum(sizes[i] for i in enum_layers)
    if n_enum > ENUMERATION_LIMIT:
        raise CapacityError(
            f"smaller hidden class has {n_enum} units, "
            f"exceeding the exact limit of {ENUMERATION_LIMIT}"
        )
    n_batch = v.shape[0]
    s = v @ params.weights[0]
    offsets = np.cumsum([0] + [sizes[i] for i in enum_layers])
    chunk = 1 << min(_CHUNK_BITS, n_enum)
    total_rows = 1 << n_enum
    parts = np.full((n_batch, (total_rows + chunk - 1) // chunk), -np.inf)
    for ci, start in enumerate(range(0, total_rows, chunk)):
        rows = enumerate_bits(n_enum, start, min(start + chunk, total_rows))
        blocks = {
            i: rows[:, offsets[k]:offsets[k + 1]] for k, i in enumerate(enum_layers)
        }
        flat = np.zeros(rows.shape[0])
        for i in enum_layers:
            flat += blocks[i] @ params.bias(i)
        shared = np.zeros(rows.shape[0])
        f1_base = None
        for t in traced_layers:
            f = params.bias(t)[None, :]
            if t - 1 in blocks and t - 1 >= 1:
                f = f + blocks[t - 1] @ params.weights[t - 1]
            if t + 1 in blocks:
                f = f + blocks[t + 1] @ params.weights[t].T
            if t == 1:
                f1_base = f
            else:
                shared += _softplus(f).sum(axis=1)
        if 1 in blocks:
            val = flat[:, None] + blocks[1] @ s.T + shared[:, None]
            parts[:, ci] = logsumexp(val, axis=0)
        else:
            for b in range(n_batch):
                val = flat + shared + _softplus(f1_base + s[b][None, :]).sum(axis=1)
                parts[b, ci] = logsumexp(val)
    return v @ params.visible_bias + logsumexp(parts, axis=1)


def marginal_log_p(params: DbmParams, v, log_z: float) -> float:
    """ln p(v) for one visible vector given ln Z."""
    vec = np.asarray(v, dtype=np.float64)
    return float(unnormalized_log_marginals(params, vec[None, :])[0] - log_z)


def _avg_ll(params: DbmParams, dataset: BinaryDataset, log_z: float) -> float:
    marg = unnormalized_log_marginals(params, dataset.vectors.astype(np.float64))
    return float(marg.mean() - log_z)


def exact_avg_ll(params: DbmParams, dataset: BinaryDataset) -> float:
    """Average ln p(v) over the dataset with an exact partition function."""
    return _avg_ll(params, dataset, exact_log_z(params).log_z)


def kl_divergence(q_vectors, q_probs, params: DbmParams, log_z: float) -> float:
    """KL(q || p) in nats between a finite-support q and the visible marginal.

    q is given as distinct binary rows with their probabilities, which must
    sum to one.
    """
    q = np.asarray(q_probs, dtype=np.float64)
    rows = np.asarray(q_vectors, dtype=np.float64)
    if q.ndim != 1 or rows.ndim != 2 or rows.shape[0] != q.size:
        raise ValueError("need one probability per support row")
    if np.any(q < 0) or abs(q.sum() - 1.0) > 1e-9:
        raise ValueError("q_probs must be a probability vector")
    log_p = unnormalized_log_marginals(params, rows) - log_z
    return float(xlogy(q, q).sum() - np.dot(q, log_p))


def ais_log_z(
    params: DbmParams,
    n_intermediate: int,
    n_runs: int,
    rng: np.random.Generator,
) -> PartitionEstimate:
    """Annealed importance sampling estimate of ln Z.

    Interpolates from the uniform distribution (all fields scaled by beta
    = 0) to the model with linearly spaced betas.  Each run accumulates
    log w += (beta_k - beta_{k-1}) * (-E(x)) and then advances x with one
    block sweep at beta_k, using its own child generator so that runs are
    independent of execution order.
    """
    if n_intermediate < 1 or n_runs < 1:
        raise ValueError("n_intermediate and n_runs must be positive")
    betas = np.linspace(0.0, 1.0, n_intermediate + 1)
    log_base = params.shape.total_units * math.log(2.0)
    base_seed = int(rng.integers(0, 2**62))
    log_weights = np.zeros(n_runs)
    for r in range(n_runs):
        g = np.random.default_rng([base_seed, r])
        layers = [
            (g.random(n) < 0.5).astype(np.float64) for n in params.shape.sizes
        ]
        lw = 0.0
        for k in range(1, betas.size):
            lw += (betas[k] - betas[k - 1]) * -float(layers_energy(params, layers))
            sweep_layers(params, layers, g, beta=betas[k])
        log_weights[r] = lw
    log_mean_w = float(logsumexp(log_weights) - math.log(n_runs))
    return PartitionEstimate(
        log_z=log_base + log_mean_w,
        exact=False,
        run_log_weights=log_weights,
        n_intermediate=n_intermediate,
        log_base=log_base,
    )


def log_z_stderr(estimate: PartitionEstimate) -> float:
    """Standard error of an AIS ln Z estimate from its run spread.

    Uses the delta method on the normalized importance weights; returns nan
    for exact results or single-run estimates.
    """
    lw = estimate.run_log_weights
    if lw is None or lw.size < 2:
        return float("nan")
    ratios = np.exp(lw - logsumexp(lw) + math.log(lw.size))
    return float(ratios.std(ddof=1) / math.sqrt(lw.size))


def ais_avg_ll(
    params: DbmParams, dataset: BinaryDataset, estimate: PartitionEstimate
) -> float:
    """Average ln p(v) over the dataset using an estimated ln Z."""
    return _avg_ll(params, dataset, estimate.log_z)
