"""Block Gibbs sampling and contrastive-divergence statistics.

A sweep resamples the even-indexed layers given the odd ones and then the
odd-indexed layers given the even ones; each block is conditionally
factorial, so one sweep touches every unit exactly once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .model import DbmParams, JointState, layer_field, random_state


@dataclass(frozen=True)
class PairStatistics:
    """Sufficient statistics of one gradient term.

    ``weights[i]`` estimates E[x_i x_{i+1}^T] for adjacent layers and
    ``biases[i]`` estimates E[x_i]; entries therefore live in [0, 1].
    """

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        ws = tuple(np.asarray(w, dtype=np.float64) for w in self.weights)
        bs = tuple(np.asarray(b, dtype=np.float64) for b in self.biases)
        if len(bs) != len(ws) + 1:
            raise ValueError("need one bias vector per layer and one weight block per edge")
        for arr, name in [(w, "weights") for w in ws] + [(b, "biases") for b in bs]:
            if not np.all((arr >= 0.0) & (arr <= 1.0)):
                raise ValueError(f"{name} entries must lie in [0, 1]")
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)


def _resample_layer(params, layers, i, rng, beta):
    f = layer_field(params, layers, i)
    p = expit(beta * f)
    layers[i] = (rng.random(np.shape(layers[i])) < p).astype(np.float64)


def sweep_layers(params, layers, rng, clamp_visible=False, beta=1.0) -> None:
    """One in-place block sweep over per-layer arrays (vectors or batches).

    ``beta`` scales every field, which samples the tempered distribution
    with energy beta * E used by annealed importance sampling.
    """
    n_layers = len(params.shape)
    start_even = 2 if clamp_visible else 0
    for i in range(start_even, n_layers, 2):
        _resample_layer(params, layers, i, rng, beta)
    for i in range(1, n_layers, 2):
        _resample_layer(params, layers, i, rng, beta)


def gibbs_sweep(
    params: DbmParams,
    state: JointState,
    rng: np.random.Generator,
    clamp_visible: bool = False,
    beta: float = 1.0,
) -> JointState:
    """One block sweep; returns the next state, visible fixed if clamped."""
    layers = list(state.layers)
    sweep_layers(params, layers, rng, clamp_visible=clamp_visible, beta=beta)
    return JointState(tuple(layers))


@dataclass
class GibbsChain:
    """A single Markov chain with its own random stream."""

    params: DbmParams
    rng: np.random.Generator
    state: JointState | None = None

    def __post_init__(self):
        if self.state is None:
            self.state = random_state(self.params.shape, self.rng)

    def advance(self, sweeps: int = 1, clamp_visible: bool = False) -> JointState:
        for _ in range(sweeps):
            self.state = gibbs_sweep(
                self.params, self.state, self.rng, clamp_visible=clamp_visible
            )
        return self.state


def pair_statistics_from_layers(layers) -> PairStatistics:
    """Average unit and adjacent-product activities over a batch.

    Entries of ``layers`` are (B, n_i) arrays of unit values or means.
    """
    batch = layers[0].shape[0]
    ws = tuple(
        lo.T @ hi / batch for lo, hi in zip(layers, layers[1:])
    )
    bs = tuple(x.mean(axis=0) for x in layers)
    return PairStatistics(weights=ws, biases=bs)


def _check_batch(params, batch):
    arr = np.asarray(batch, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != params.shape.n_visible:
        raise ValueError(
            f"batch must have shape (B, {params.shape.n_visible}), got {arr.shape}"
        )
    if arr.shape[0] == 0:
        raise ValueError("batch must not be empty")
    if not np.all((arr == 0.0) | (arr == 1.0)):
        raise ValueError("batch must be binary in {0, 1}")
    return arr


def cd_statistics(
    params: DbmParams,
    batch,
    hidden_init,
    k: int,
    rng: np.random.Generator,
) -> PairStatistics:
    """Model-term statistics from non-persistent chains after k sweeps.

    Each chain starts at a data vector with the supplied binary hidden
    layers, runs k unclamped sweeps, and contributes its final joint
    configuration.
    """
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    v = _check_batch(params, batch)
    sizes = params.shape.sizes
    if len(hidden_init) != len(sizes) - 1:
        raise ValueError(f"expected {len(sizes) - 1} hidden layers in hidden_init")
    layers = [v.copy()]
    for i, h in enumerate(hidden_init):
        arr = np.asarray(h, dtype=np.float64)
        if arr.shape != (v.shape[0], sizes[i + 1]):
            raise ValueError(
                f"hidden_init[{i}] must have shape {(v.shape[0], sizes[i + 1])}, "
                f"got {arr.shape}"
            )
        layers.append(arr.copy())
    for _ in range(k):
        sweep_layers(params, layers, rng)
    return pair_statistics_from_layers(layers)


def data_statistics(params: DbmParams, batch, mu) -> PairStatistics:
    """Data-term statistics from visible vectors and their hidden means.

    Uses the factorial means directly instead of sampled hidden states,
    which removes the sampling noise from the data term.
    """
    v = _check_batch(params, batch)
    layers = [v] + [np.asarray(m, dtype=np.float64) for m in mu]
    sizes = params.shape.sizes
    for i, m in enumerate(layers[1:]):
        if m.shape != (v.shape[0], sizes[i + 1]):
            raise ValueError(
                f"mu[{i}] must have shape {(v.shape[0], sizes[i + 1])}, got {m.shape}"
            )
    return pair_statistics_from_layers(layers)
