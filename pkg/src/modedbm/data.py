"""Binary training data: synthetic bar patterns and IDX image ingestion."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IDX_MAGIC_IMAGES = 0x00000803
IDX_MAGIC_LABELS = 0x00000801


class IdxFormatError(ValueError):
    """Malformed IDX file (bad magic or truncated payload)."""


@dataclass(frozen=True)
class BinaryDataset:
    """A set of binary visible vectors, one per row."""

    vectors: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.vectors)
        if arr.ndim != 2:
            raise ValueError(f"vectors must be 2-D (N, n_v), got shape {arr.shape}")
        if arr.size and not np.all((arr == 0) | (arr == 1)):
            raise ValueError("vectors must be binary in {0, 1}")
        if arr.shape[0] == 0:
            raise ValueError("dataset must contain at least one vector")
        object.__setattr__(self, "vectors", arr.astype(np.uint8))

    @property
    def n_visible(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return self.vectors.shape[0]

    def empirical_distribution(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct rows and their empirical probabilities."""
        rows, counts = np.unique(self.vectors, axis=0, return_counts=True)
        return rows, counts / counts.sum()

    def subset(self, limit: int | None) -> "BinaryDataset":
        if limit is None or limit >= len(self):
            return self
        if limit < 1:
            raise ValueError(f"subset limit must be positive, got {limit}")
        return BinaryDataset(self.vectors[:limit])


def shifting_bar(n_v: int, bar_len: int) -> BinaryDataset:
    """All cyclic shifts of a contiguous bar of ones on a ring of n_v pixels.

    Yields exactly n_v distinct patterns, so the empirical distribution is
    uniform with entropy ln(n_v).
    """
    if n_v < 2:
        raise ValueError(f"n_v must be at least 2, got {n_v}")
    if not 0 < bar_len < n_v:
        raise ValueError(f"bar_len must be in (0, n_v), got {bar_len}")
    rows = np.zeros((n_v, n_v), dtype=np.uint8)
    for s in range(n_v):
        rows[s, (s + np.arange(bar_len)) % n_v] = 1
    return BinaryDataset(rows)


def _open_maybe_gzip(path: Path):
    with open(path, "rb") as fh:
        head = fh.read(2)
    if head == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def load_idx(path) -> np.ndarray:
    """Read a big-endian IDX file of unsigned bytes (gzip transparent).

    Accepts the 3-D image layout (magic 0x00000803) and the 1-D label
    layout (magic 0x00000801).  Returns a uint8 array with the dimensions
    declared in the header.
    """
    path = Path(path)
    with _open_maybe_gzip(path) as fh:
        raw = fh.read()
    if len(raw) < 4:
        raise IdxFormatError(f"{path}: truncated header at offset {len(raw)}")
    (magic,) = struct.unpack(">i", raw[:4])
    if magic == IDX_MAGIC_IMAGES:
        ndim = 3
    elif magic == IDX_MAGIC_LABELS:
        ndim = 1
    else:
        raise IdxFormatError(f"{path}: unexpected magic 0x{magic & 0xFFFFFFFF:08x}")
    header_len = 4 + 4 * ndim
    if len(raw) < header_len:
        raise IdxFormatError(f"{path}: truncated header at offset {len(raw)}")
    dims = struct.unpack(f">{ndim}i", raw[4:header_len])
    if any(d < 0 for d in dims):
        raise IdxFormatError(f"{path}: negative dimension in header {dims}")
    n_bytes = int(np.prod(dims, dtype=np.int64))
    if len(raw) < header_len + n_bytes:
        raise IdxFormatError(
            f"{path}: payload ends at offset {len(raw)}, "
            f"expected {header_len + n_bytes} bytes"
        )
    data = np.frombuffer(raw, dtype=np.uint8, count=n_bytes, offset=header_len)
    return data.reshape(dims).copy()


def binarize(images: np.ndarray, threshold: int = 128) -> BinaryDataset:
    """Threshold grayscale images to bits and flatten each image to a row.

    Pixels >= threshold map to 1.  A 1-D input is treated as a single image.
    """
    arr = np.asarray(images)
    if arr.ndim == 1:
        arr = arr[None, :]
    flat = arr.reshape(arr.shape[0], -1)
    return BinaryDataset((flat >= threshold).astype(np.uint8))


def save_bitstrings(dataset: BinaryDataset, path) -> None:
    """Write one 0/1 string per row, newline terminated."""
    lines = ["".join("1" if b else "0" for b in row) for row in dataset.vectors]
    Path(path).write_text("\n".join(lines) + "\n")


def load_bitstrings(path) -> BinaryDataset:
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines() if ln]
    if not lines:
        raise ValueError(f"{path}: no rows found")
    width = len(lines[0])
    rows = np.zeros((len(lines), width), dtype=np.uint8)
    for i, ln in enumerate(lines):
        if len(ln) != width or set(ln) - {"0", "1"}:
            raise ValueError(f"{path}: line {i + 1} is not a {width}-bit string")
        rows[i] = np.frombuffer(ln.encode(), dtype=np.uint8) - ord("0")
    return BinaryDataset(rows)
