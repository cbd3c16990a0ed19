"""Lowest-energy joint configurations, found exactly or by annealing.

Both solvers exploit the layered structure: fixing one parity class of
layers makes every unit of the other class independent, so its optimal
assignment follows unit by unit from the sign of the local field.  The
exact solver enumerates the smaller parity class and completes the other
greedily; the annealer runs single-site heat-bath updates with a rising
inverse temperature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .gibbs import PairStatistics, pair_statistics_from_layers, _check_batch
from .model import (
    ENUMERATION_LIMIT,
    CapacityError,
    DbmParams,
    JointState,
    enumerate_bits,
    layers_energy,
)

_CHUNK_BITS = 16


@dataclass(frozen=True)
class ModeQuery:
    """What to minimize over: everything, or hiddens with the visible fixed."""

    clamp: np.ndarray | None = None

    def __post_init__(self):
        if self.clamp is not None:
            arr = np.asarray(self.clamp, dtype=np.float64)
            if arr.ndim != 1:
                raise ValueError(f"clamp must be 1-D, got shape {arr.shape}")
            if not np.all((arr == 0.0) | (arr == 1.0)):
                raise ValueError("clamp must be binary in {0, 1}")
            object.__setattr__(self, "clamp", arr)


@dataclass(frozen=True)
class ModeResult:
    """A joint configuration and its energy; exact marks a certified optimum."""

    state: JointState
    energy: float
    exact: bool


@dataclass(frozen=True)
class AnnealSchedule:
    """Heat-bath annealing schedule.

    The inverse temperature rises geometrically from beta_start to beta_end
    over proposals_per_node * n_free single-site proposals; the search
    restarts from fresh random states and keeps the best configuration seen.
    """

    beta_start: float = 0.1
    beta_end: float = 5.0
    proposals_per_node: int = 50
    restarts: int = 10

    def __post_init__(self):
        if not 0 < self.beta_start <= self.beta_end:
            raise ValueError("need 0 < beta_start <= beta_end")
        if self.proposals_per_node < 1 or self.restarts < 1:
            raise ValueError("proposals_per_node and restarts must be positive")


def _free_layer_classes(params: DbmParams, clamped: bool):
    """Split the free layers into the two conditional-independence classes.

    Returns (enum_layers, traced_layers) with the smaller class first; that
    class gets enumerated while the other is optimized or summed per unit.
    """
    sizes = params.shape.sizes
    free = range(1, len(sizes)) if clamped else range(len(sizes))
    even = [i for i in free if i % 2 == 0]
    odd = [i for i in free if i % 2 == 1]
    n_even = sum(sizes[i] for i in even)
    n_odd = sum(sizes[i] for i in odd)
    return (even, odd) if n_even <= n_odd else (odd, even)


def _check_clamp(params: DbmParams, clamp: np.ndarray) -> np.ndarray:
    if clamp.shape != (params.shape.n_visible,):
        raise ValueError(
            f"clamp must have shape ({params.shape.n_visible},), got {clamp.shape}"
        )
    return clamp


def exact_mode(params: DbmParams, query: ModeQuery | None = None) -> ModeResult:
    """Certified lowest-energy configuration by parity-class enumeration.

    Energy ties resolve to the lexicographically smallest joint state,
    visible units first.  Refuses models whose free units exceed the
    enumeration guard.
    """
    query = query or ModeQuery()
    sizes = params.shape.sizes
    n_layers = len(sizes)
    clamped = query.clamp is not None
    if clamped:
        _check_clamp(params, query.clamp)
    n_free = sum(sizes[1:]) if clamped else sum(sizes)
    if n_free > ENUMERATION_LIMIT:
        raise CapacityError(
            f"{n_free} free units exceed the exact-mode limit of {ENUMERATION_LIMIT}"
        )
    enum_layers, traced_layers = _free_layer_classes(params, clamped)

    base = 0.0
    if clamped:
        base = -float(query.clamp @ params.visible_bias)

    # Linear coefficients of the enumerated units: own bias plus any constant
    # field contributed by the clamped visible layer.
    coef = {}
    for i in enum_layers:
        c = params.bias(i).copy()
        if clamped and i == 1:
            c += query.clamp @ params.weights[0]
        coef[i] = c

    # Constant part of the traced-layer fields.
    traced_base = {}
    for t in traced_layers:
        f = params.bias(t).copy()
        if clamped and t == 1:
            f = f + query.clamp @ params.weights[0]
        traced_base[t] = f

    n_enum = sum(sizes[i] for i in enum_layers)
    offsets = np.cumsum([0] + [sizes[i] for i in enum_layers])
    best_energy = np.inf
    best_key = None
    best_layers = None

    chunk = 1 << min(_CHUNK_BITS, n_enum)
    total_rows = 1 << n_enum
    for start in range(0, total_rows, chunk):
        rows = enumerate_bits(n_enum, start, min(start + chunk, total_rows))
        blocks = {
            i: rows[:, offsets[k]:offsets[k + 1]] for k, i in enumerate(enum_layers)
        }
        e = np.full(rows.shape[0], base)
        for i in enum_layers:
            e -= blocks[i] @ coef[i]
        comp = {}
        for t in traced_layers:
            f = traced_base[t][None, :]
            if t - 1 in blocks:
                f = f + blocks[t - 1] @ params.weights[t - 1]
            if t + 1 in blocks:
                f = f + blocks[t + 1] @ params.weights[t].T
            e -= np.maximum(f, 0.0).sum(axis=1)
            comp[t] = (f > 0.0).astype(np.float64)
        m = e.min()
        if m > best_energy:
            continue
        idx = np.flatnonzero(e == m)
        cols = []
        for i in range(n_layers):
            if clamped and i == 0:
                cols.append(np.broadcast_to(query.clamp, (idx.size, sizes[0])))
            elif i in blocks:
                cols.append(blocks[i][idx])
            else:
                c = comp[i]
                cols.append(np.broadcast_to(c, (idx.size, sizes[i])) if c.shape[0] == 1 else c[idx])
        cand = np.concatenate([np.asarray(c) for c in cols], axis=1)
        order = np.lexsort(cand[:, ::-1].T) if cand.shape[0] > 1 else [0]
        key = tuple(cand[order[0]].astype(np.int8))
        if m < best_energy or key < best_key:
            best_energy = m
            best_key = key
            bits = cand[order[0]]
            splits = np.cumsum(sizes[:-1])
            best_layers = tuple(np.array(p) for p in np.split(bits, splits))

    state = JointState(best_layers)
    return ModeResult(state=state, energy=float(layers_energy(params, state.layers)), exact=True)


def _anneal_engine(params, clamp, n_chains, schedule, rng):
    """Shared annealing core over n_chains parallel states.

    clamp is None or an (n_chains, n_v) array fixing the visible layer per
    chain.  Returns per-chain best layer arrays and their exact energies.
    """
    sizes = params.shape.sizes
    last = len(sizes) - 1
    clamped = clamp is not None
    free_layers = list(range(1, last + 1)) if clamped else list(range(last + 1))

    x = []
    for i in range(last + 1):
        if clamped and i == 0:
            x.append(np.asarray(clamp, dtype=np.float64).copy())
        else:
            x.append((rng.random((n_chains, sizes[i])) < 0.5).astype(np.float64))

    fields = [None] * (last + 1)
    for i in free_layers:
        f = np.tile(params.bias(i), (n_chains, 1))
        if i > 0:
            f += x[i - 1] @ params.weights[i - 1]
        if i < last:
            f += x[i + 1] @ params.weights[i].T
        fields[i] = f

    node_layer = np.concatenate([np.full(sizes[i], i) for i in free_layers])
    node_col = np.concatenate([np.arange(sizes[i]) for i in free_layers])
    n_free = node_layer.size
    n_steps = schedule.proposals_per_node * n_free
    betas = np.geomspace(schedule.beta_start, schedule.beta_end, n_steps)
    node_choice = rng.integers(0, n_free, size=n_steps)

    e = np.atleast_1d(layers_energy(params, x))
    best_e = e.copy()
    best_x = [xi.copy() for xi in x]
    for t in range(n_steps):
        i = int(node_layer[node_choice[t]])
        j = int(node_col[node_choice[t]])
        f = fields[i][:, j]
        new = (rng.random(n_chains) < expit(betas[t] * f)).astype(np.float64)
        delta = new - x[i][:, j]
        if not delta.any():
            continue
        e = e - delta * f
        x[i][:, j] = new
        if i > 0 and fields[i - 1] is not None:
            fields[i - 1] += delta[:, None] * params.weights[i - 1][:, j][None, :]
        if i < last:
            fields[i + 1] += delta[:, None] * params.weights[i][j, :][None, :]
        better = e < best_e
        if better.any():
            best_e[better] = e[better]
            for arr, cur in zip(best_x, x):
                arr[better] = cur[better]

    return best_x, np.atleast_1d(layers_energy(params, best_x))


def anneal_mode(
    params: DbmParams,
    query: ModeQuery | None = None,
    schedule: AnnealSchedule | None = None,
    rng: np.random.Generator | None = None,
) -> ModeResult:
    """Best configuration found by restarted heat-bath annealing.

    No optimality certificate; the returned energy is recomputed exactly
    from the returned state.
    """
    if rng is None:
        raise ValueError("anneal_mode needs a random generator")
    query = query or ModeQuery()
    schedule = schedule or AnnealSchedule()
    clamp = None
    if query.clamp is not None:
        _check_clamp(params, query.clamp)
        clamp = np.tile(query.clamp, (schedule.restarts, 1))
    best_x, e = _anneal_engine(params, clamp, schedule.restarts, schedule, rng)
    k = int(np.argmin(e))
    state = JointState(tuple(xi[k] for xi in best_x))
    return ModeResult(state=state, energy=float(e[k]), exact=False)


def solve_mode(
    params: DbmParams,
    query: ModeQuery | None = None,
    solver: str = "auto",
    rng: np.random.Generator | None = None,
    schedule: AnnealSchedule | None = None,
) -> ModeResult:
    """Dispatch to the exact solver when feasible, otherwise anneal."""
    query = query or ModeQuery()
    if solver not in ("auto", "exact", "anneal"):
        raise ValueError(f"unknown solver {solver!r}")
    if solver == "auto":
        clamped = query.clamp is not None
        n_free = params.shape.n_hidden_total if clamped else params.shape.total_units
        solver = "exact" if n_free <= ENUMERATION_LIMIT else "anneal"
    if solver == "exact":
        return exact_mode(params, query)
    return anneal_mode(params, query, schedule=schedule, rng=rng)


def mode_statistics(
    params: DbmParams,
    batch,
    solver: str = "auto",
    rng: np.random.Generator | None = None,
    schedule: AnnealSchedule | None = None,
) -> tuple[PairStatistics, PairStatistics]:
    """Data-term and model-term statistics evaluated at energy minima.

    The model term uses the free minimum of the joint energy; the data term
    averages, over the batch, the hidden completion that minimizes the
    energy with the visible layer clamped to each data vector.
    """
    v = _check_batch(params, batch)
    model = solve_mode(params, ModeQuery(), solver=solver, rng=rng, schedule=schedule)
    model_stats = pair_statistics_from_layers([x[None, :] for x in model.state.layers])

    use_exact = solver == "exact" or (
        solver == "auto" and params.shape.n_hidden_total <= ENUMERATION_LIMIT
    )
    if use_exact:
        per_layer = [[] for _ in params.shape.sizes]
        for row in v:
            res = exact_mode(params, ModeQuery(clamp=row))
            for i, xi in enumerate(res.state.layers):
                per_layer[i].append(xi)
        stacked = [np.stack(col) for col in per_layer]
    else:
        if rng is None:
            raise ValueError("annealed mode statistics need a random generator")
        schedule = schedule or AnnealSchedule()
        restarts = schedule.restarts
        clamp = np.repeat(v, restarts, axis=0)
        best_x, e = _anneal_engine(params, clamp, clamp.shape[0], schedule, rng)
        pick = np.argmin(e.reshape(v.shape[0], restarts), axis=1)
        flat = pick + restarts * np.arange(v.shape[0])
        stacked = [xi[flat] for xi in best_x]
    data_stats = pair_statistics_from_layers(stacked)
    return data_stats, model_stats
