"""Layered binary Boltzmann machines: parameters, energy, local conditionals.

Layers are indexed 0..L with layer 0 the visible layer.  Couplings exist
only between adjacent layers, so even-indexed layers are conditionally
independent given the odd-indexed ones and vice versa.  Units take values
in {0, 1} and all arithmetic is float64.  With a single hidden layer the
model reduces to an RBM.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

# Exact routines enumerate one conditional-independence class of the graph.
# Past this many enumerated units the table no longer fits in memory/time.
ENUMERATION_LIMIT = 26


class CapacityError(RuntimeError):
    """Raised when an exact computation would enumerate too many units."""


@dataclass(frozen=True)
class LayerShape:
    """Layer widths, visible first: (n_visible, n_h1, ..., n_hL)."""

    sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        object.__setattr__(self, "sizes", sizes)
        if len(sizes) < 2:
            raise ValueError("need a visible layer and at least one hidden layer")
        if any(s < 1 for s in sizes):
            raise ValueError(f"layer widths must be positive, got {sizes}")

    @property
    def n_visible(self) -> int:
        return self.sizes[0]

    @property
    def hidden_sizes(self) -> tuple[int, ...]:
        return self.sizes[1:]

    @property
    def n_hidden_layers(self) -> int:
        return len(self.sizes) - 1

    @property
    def n_hidden_total(self) -> int:
        return sum(self.sizes[1:])

    @property
    def total_units(self) -> int:
        return sum(self.sizes)

    def __len__(self) -> int:
        return len(self.sizes)

    def __iter__(self):
        return iter(self.sizes)

    def __getitem__(self, i: int) -> int:
        return self.sizes[i]


def _as_vector(x, n: int, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape != (n,):
        raise ValueError(f"{name} must have shape ({n},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class DbmParams:
    """Biases and inter-layer weights defining the energy function.

    ``weights[i]`` has shape ``(sizes[i], sizes[i+1])`` and couples layer i
    to layer i+1.  ``hidden_biases[i]`` belongs to hidden layer i+1.
    """

    shape: LayerShape
    visible_bias: np.ndarray
    hidden_biases: tuple[np.ndarray, ...]
    weights: tuple[np.ndarray, ...]

    def __post_init__(self):
        sizes = self.shape.sizes
        a = _as_vector(self.visible_bias, sizes[0], "visible_bias")
        if len(self.hidden_biases) != len(sizes) - 1:
            raise ValueError(
                f"expected {len(sizes) - 1} hidden bias vectors, "
                f"got {len(self.hidden_biases)}"
            )
        bs = tuple(
            _as_vector(b, sizes[i + 1], f"hidden_biases[{i}]")
            for i, b in enumerate(self.hidden_biases)
        )
        if len(self.weights) != len(sizes) - 1:
            raise ValueError(
                f"expected {len(sizes) - 1} weight matrices, got {len(self.weights)}"
            )
        ws = []
        for i, w in enumerate(self.weights):
            arr = np.asarray(w, dtype=np.float64)
            want = (sizes[i], sizes[i + 1])
            if arr.shape != want:
                raise ValueError(f"weights[{i}] must have shape {want}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"weights[{i}] contains non-finite entries")
            ws.append(arr)
        object.__setattr__(self, "visible_bias", a)
        object.__setattr__(self, "hidden_biases", bs)
        object.__setattr__(self, "weights", tuple(ws))

    @classmethod
    def zeros(cls, shape: LayerShape) -> "DbmParams":
        sizes = shape.sizes
        return cls(
            shape=shape,
            visible_bias=np.zeros(sizes[0]),
            hidden_biases=tuple(np.zeros(n) for n in sizes[1:]),
            weights=tuple(
                np.zeros((sizes[i], sizes[i + 1])) for i in range(len(sizes) - 1)
            ),
        )

    def bias(self, layer: int) -> np.ndarray:
        """Bias vector of a layer by its global index (0 = visible)."""
        if layer == 0:
            return self.visible_bias
        return self.hidden_biases[layer - 1]

    def to_json_dict(self) -> dict:
        return {
            "shape": list(self.shape.sizes),
            "a": self.visible_bias.tolist(),
            "b": [b.tolist() for b in self.hidden_biases],
            "W": [w.tolist() for w in self.weights],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "DbmParams":
        missing = {"shape", "a", "b", "W"} - set(d)
        if missing:
            raise ValueError(f"checkpoint missing keys: {sorted(missing)}")
        shape = LayerShape(tuple(d["shape"]))
        return cls(
            shape=shape,
            visible_bias=np.asarray(d["a"], dtype=np.float64),
            hidden_biases=tuple(np.asarray(b, dtype=np.float64) for b in d["b"]),
            weights=tuple(np.asarray(w, dtype=np.float64) for w in d["W"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict()))

    @classmethod
    def load(cls, path) -> "DbmParams":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


def _check_binary(arr: np.ndarray, name: str) -> np.ndarray:
    out = np.asarray(arr, dtype=np.float64)
    if not np.all((out == 0.0) | (out == 1.0)):
        raise ValueError(f"{name} must be binary in {{0, 1}}")
    return out


@dataclass(frozen=True)
class JointState:
    """One binary configuration of every layer, visible first."""

    layers: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.layers) < 2:
            raise ValueError("need at least visible plus one hidden layer")
        cleaned = []
        for i, x in enumerate(self.layers):
            arr = _check_binary(x, f"layers[{i}]")
            if arr.ndim != 1:
                raise ValueError(f"layers[{i}] must be 1-D, got shape {arr.shape}")
            cleaned.append(arr)
        object.__setattr__(self, "layers", tuple(cleaned))

    @property
    def visible(self) -> np.ndarray:
        return self.layers[0]

    def shape(self) -> LayerShape:
        return LayerShape(tuple(x.size for x in self.layers))

    def concatenated(self) -> np.ndarray:
        return np.concatenate(self.layers)


def _check_state(params: DbmParams, state: JointState) -> None:
    got = tuple(x.size for x in state.layers)
    if got != params.shape.sizes:
        raise ValueError(f"state layout {got} does not match model {params.shape.sizes}")


def layers_energy(params: DbmParams, layers) -> np.ndarray:
    """Energy of configurations given as per-layer arrays.

    Each entry of ``layers`` is either a single layer vector ``(n_i,)`` or a
    batch ``(B, n_i)``.  Entries may be fractional; the same multilinear form
    then yields the mean-field energy term.  Returns a scalar or ``(B,)``.
    """
    e = -(layers[0] @ params.visible_bias)
    for b, h in zip(params.hidden_biases, layers[1:]):
        e = e - h @ b
    for w, lo, hi in zip(params.weights, layers, layers[1:]):
        e = e - ((lo @ w) * hi).sum(axis=-1)
    return e


def energy(params: DbmParams, state: JointState) -> float:
    """Energy of one joint binary configuration."""
    _check_state(params, state)
    return float(layers_energy(params, state.layers))


def layer_field(params: DbmParams, layers, i: int) -> np.ndarray:
    """Pre-activation field on layer i given its neighbouring layers.

    Accepts single vectors or batches, like :func:`layers_energy`.
    """
    n_layers = len(params.shape)
    f = np.asarray(params.bias(i))
    if i > 0:
        f = f + layers[i - 1] @ params.weights[i - 1]
    if i < n_layers - 1:
        f = f + layers[i + 1] @ params.weights[i].T
    return f


def layer_conditional(params: DbmParams, state: JointState, i: int) -> np.ndarray:
    """P(unit = 1) for every unit of layer i given the rest of the state."""
    _check_state(params, state)
    if not 0 <= i < len(params.shape):
        raise IndexError(f"layer index {i} out of range for {len(params.shape)} layers")
    return expit(layer_field(params, state.layers, i))


def random_state(shape: LayerShape, rng: np.random.Generator) -> JointState:
    """Uniformly random joint configuration."""
    return JointState(
        tuple((rng.random(n) < 0.5).astype(np.float64) for n in shape.sizes)
    )


def param_count(shape: LayerShape) -> int:
    """Number of free parameters (all weights plus all biases)."""
    sizes = shape.sizes
    n_weights = sum(sizes[i] * sizes[i + 1] for i in range(len(sizes) - 1))
    return n_weights + sum(sizes)


def efficiency(alpha: float) -> float:
    """Large-network limit of deep-to-shallow parameter count ratio.

    For a two-hidden-layer network with n_h2 = alpha * n_h1 compared against
    a single hidden layer of the same total width, the parameter ratio tends
    to 1 / (1 + alpha) as the visible layer grows.
    """
    if alpha < 0:
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    return 1.0 / (1.0 + alpha)


def enumerate_bits(n_bits: int, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Rows of binary codes for integers in [start, stop), MSB first.

    Row k encodes integer start + k, so iterating the full range yields all
    2**n_bits configurations in lexicographic order.
    """
    if stop is None:
        stop = 1 << n_bits
    idx = np.arange(start, stop, dtype=np.uint64)
    if n_bits == 0:
        return np.zeros((idx.size, 0), dtype=np.float64)
    shifts = np.arange(n_bits - 1, -1, -1, dtype=np.uint64)
    return ((idx[:, None] >> shifts[None, :]) & 1).astype(np.float64)
