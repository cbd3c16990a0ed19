"""Factorial mean-field inference over the hidden layers given data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, xlogy

from .model import DbmParams, layers_energy

MF_TOL = 1e-6
MF_MAX_ITERS = 30


@dataclass(frozen=True)
class BatchMeanField:
    """Fixed-point result for a batch of visible vectors.

    ``mu[i]`` holds the factorial means of hidden layer i+1, one row per
    batch element.  ``residual`` is the largest per-element change during
    the final pass.
    """

    mu: tuple[np.ndarray, ...]
    iterations: int
    converged: np.ndarray
    residual: np.ndarray


@dataclass(frozen=True)
class MeanFieldState:
    """Fixed-point result for a single visible vector."""

    mu: tuple[np.ndarray, ...]
    iterations: int
    converged: bool
    residual: float


def mf_fixed_point_batch(
    params: DbmParams,
    batch,
    rng: np.random.Generator,
    tol: float = MF_TOL,
    max_iters: int = MF_MAX_ITERS,
) -> BatchMeanField:
    """Iterate the factorial fixed point for every row of a visible batch.

    Means start uniform on [0, 1) and layers update in place in bottom-up
    order, so each pass uses the freshest neighbouring means.  Iteration
    stops when the largest coordinate change over a pass drops below tol
    for every batch element.
    """
    v = np.asarray(batch, dtype=np.float64)
    if v.ndim != 2 or v.shape[1] != params.shape.n_visible:
        raise ValueError(
            f"batch must have shape (B, {params.shape.n_visible}), got {v.shape}"
        )
    n_batch = v.shape[0]
    hidden = params.shape.hidden_sizes
    n_hidden = len(hidden)
    mu = [rng.random((n_batch, n)) for n in hidden]
    v_term = v @ params.weights[0]
    delta = np.full(n_batch, np.inf)
    iterations = 0
    for iterations in range(1, max_iters + 1):
        delta = np.zeros(n_batch)
        for i in range(n_hidden):
            f = v_term if i == 0 else mu[i - 1] @ params.weights[i]
            if i + 1 < n_hidden:
                f = f + mu[i + 1] @ params.weights[i + 1].T
            new = expit(f + params.hidden_biases[i])
            delta = np.maximum(delta, np.abs(new - mu[i]).max(axis=1))
            mu[i] = new
        if np.all(delta < tol):
            break
    return BatchMeanField(
        mu=tuple(mu),
        iterations=iterations,
        converged=delta < tol,
        residual=delta,
    )


def mf_fixed_point(
    params: DbmParams,
    v,
    rng: np.random.Generator,
    tol: float = MF_TOL,
    max_iters: int = MF_MAX_ITERS,
) -> MeanFieldState:
    """Single-vector convenience wrapper around the batch fixed point."""
    result = mf_fixed_point_batch(
        params, np.asarray(v, dtype=np.float64)[None, :], rng, tol=tol, max_iters=max_iters
    )
    return MeanFieldState(
        mu=tuple(m[0] for m in result.mu),
        iterations=result.iterations,
        converged=bool(result.converged[0]),
        residual=float(result.residual[0]),
    )


def bernoulli_entropy(mu: np.ndarray) -> float:
    """Entropy in nats of independent Bernoulli units with the given means."""
    m = np.asarray(mu, dtype=np.float64)
    if np.any((m < 0.0) | (m > 1.0)):
        raise ValueError("means must lie in [0, 1]")
    return float(-(xlogy(m, m) + xlogy(1.0 - m, 1.0 - m)).sum())


def elbo(params: DbmParams, v, mu, log_z: float) -> float:
    """Variational lower bound on ln p(v) under a factorial hidden law.

    Computes E[-energy] - ln Z + entropy, where the expectation is the
    energy form evaluated at the means (exact for pairwise interactions
    across adjacent layers) and the entropy treats units as independent.
    Any means in [0, 1] give a valid bound; the fixed point maximizes it.
    """
    vec = np.asarray(v, dtype=np.float64)
    layers = [vec] + [np.asarray(m, dtype=np.float64) for m in mu]
    sizes = params.shape.sizes
    if vec.shape != (sizes[0],):
        raise ValueError(f"v must have shape ({sizes[0]},), got {vec.shape}")
    for i, m in enumerate(layers[1:]):
        if m.shape != (sizes[i + 1],):
            raise ValueError(f"mu[{i}] must have shape ({sizes[i + 1]},), got {m.shape}")
    entropy = sum(bernoulli_entropy(m) for m in layers[1:])
    return float(-layers_energy(params, layers) - log_z + entropy)
