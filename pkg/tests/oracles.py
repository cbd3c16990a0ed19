"""Independent brute-force references used by the tests.

Everything here works by exhaustive enumeration of the full joint state
space (no parity tricks, no tracing), so agreement with the package is a
meaningful cross-check and not a tautology.
"""

import numpy as np
from scipy.special import logsumexp

from modedbm.model import DbmParams, LayerShape


def random_params(rng, sizes, weight_scale=1.0, bias_scale=1.0):
    """A random dense model for oracle comparisons."""
    shape = LayerShape(tuple(sizes))
    return DbmParams(
        shape=shape,
        visible_bias=rng.normal(0.0, bias_scale, sizes[0]),
        hidden_biases=tuple(rng.normal(0.0, bias_scale, n) for n in sizes[1:]),
        weights=tuple(
            rng.normal(0.0, weight_scale, (sizes[i], sizes[i + 1]))
            for i in range(len(sizes) - 1)
        ),
    )


def enumerate_joint(sizes):
    """All joint configurations as per-layer blocks of one big bit table.

    Returns (layers, n_states) where layers[i] has shape (2**total, n_i)
    and row k spells the integer k MSB-first across the concatenated
    layers, so rows are in lexicographic state order.
    """
    total = sum(sizes)
    idx = np.arange(1 << total, dtype=np.uint64)
    shifts = np.arange(total - 1, -1, -1, dtype=np.uint64)
    table = ((idx[:, None] >> shifts[None, :]) & 1).astype(np.float64)
    splits = np.cumsum(sizes[:-1])
    return np.split(table, splits, axis=1), 1 << total


def state_energies(params, layers):
    """Energies of a batch given as per-layer blocks; straight summation."""
    e = -(layers[0] @ params.visible_bias)
    for i, b in enumerate(params.hidden_biases):
        e = e - layers[i + 1] @ b
    for i, w in enumerate(params.weights):
        e = e - np.einsum("bi,ij,bj->b", layers[i], w, layers[i + 1])
    return e


def naive_log_z(params):
    layers, _ = enumerate_joint(params.shape.sizes)
    return float(logsumexp(-state_energies(params, layers)))


def naive_state_probs(params):
    """Full joint table and its exact probabilities."""
    layers, _ = enumerate_joint(params.shape.sizes)
    e = state_energies(params, layers)
    logp = -e - logsumexp(-e)
    return layers, np.exp(logp)


def naive_marginal_log_p(params, v):
    """ln p(v) by enumerating all hidden configurations."""
    sizes = params.shape.sizes
    hidden, _ = enumerate_joint(sizes[1:])
    n = hidden[0].shape[0]
    layers = [np.tile(np.asarray(v, dtype=np.float64), (n, 1))] + hidden
    e = state_energies(params, layers)
    return float(logsumexp(-e) - naive_log_z(params))


def naive_model_expectations(params):
    """Exact model-term pair and unit expectations under the joint law."""
    layers, _ = enumerate_joint(params.shape.sizes)
    e = state_energies(params, layers)
    p = np.exp(-e - logsumexp(-e))
    weights = [
        (layers[i] * p[:, None]).T @ layers[i + 1]
        for i in range(len(layers) - 1)
    ]
    biases = [p @ layers[i] for i in range(len(layers))]
    return weights, biases


def naive_clamped_expectations(params, batch):
    """Exact data-term expectations: hidden law clamped per data vector."""
    sizes = params.shape.sizes
    hidden, _ = enumerate_joint(sizes[1:])
    n = hidden[0].shape[0]
    w_acc = [np.zeros((sizes[i], sizes[i + 1])) for i in range(len(sizes) - 1)]
    b_acc = [np.zeros(s) for s in sizes]
    batch = np.asarray(batch, dtype=np.float64)
    for v in batch:
        layers = [np.tile(v, (n, 1))] + hidden
        e = state_energies(params, layers)
        p = np.exp(-e - logsumexp(-e))
        for i in range(len(sizes) - 1):
            w_acc[i] += (layers[i] * p[:, None]).T @ layers[i + 1]
        for i in range(len(sizes)):
            b_acc[i] += p @ layers[i]
    m = batch.shape[0]
    return [w / m for w in w_acc], [b / m for b in b_acc]


def naive_mode(params, clamp=None):
    """Global energy minimum by full enumeration, lexicographic ties.

    Rows of the enumeration table are already in lexicographic state
    order, so the first index attaining the minimum is the tie-break
    winner.
    """
    sizes = params.shape.sizes
    if clamp is None:
        layers, _ = enumerate_joint(sizes)
    else:
        hidden, _ = enumerate_joint(sizes[1:])
        n = hidden[0].shape[0]
        layers = [np.tile(np.asarray(clamp, dtype=np.float64), (n, 1))] + hidden
    e = state_energies(params, layers)
    k = int(np.argmin(e))
    return [x[k].copy() for x in layers], float(e[k])


def naive_conditional(params, layers_fixed, layer_index):
    """P(unit = 1 | rest) for one layer by enumerating that layer only."""
    sizes = params.shape.sizes
    n = sizes[layer_index]
    block, _ = enumerate_joint([n])
    block = block[0]
    reps = block.shape[0]
    layers = []
    for i, x in enumerate(layers_fixed):
        if i == layer_index:
            layers.append(block)
        else:
            layers.append(np.tile(np.asarray(x, dtype=np.float64), (reps, 1)))
    e = state_energies(params, layers)
    p = np.exp(-e - logsumexp(-e))
    return block.T @ p
