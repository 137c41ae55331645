"""Binary feature-file formats.

Patch feature file (all little-endian):
    magic  4 bytes  b"SSB1"
    flags  u8       bit0 = grid coordinates present, bit1 = chromatic present
    n      u32      row count
    d      u32      embedding dimension
    rows   n times: [2 x f32 coords][3 x f32 chromatic][d x f32 embedding]
                    (coord / chromatic blocks only when flagged)

A slide-vector file uses the same header with n = 1 and neither flag set.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError

MAGIC_FEATURES = b"SSB1"
FLAG_COORDS = 0x01
FLAG_CHROMATIC = 0x02

_HEADER = struct.Struct("<4sBII")


@dataclass
class PatchSet:
    """Per-slide patch data as parallel arrays (rows align across fields)."""

    embeddings: np.ndarray            # (n, d) float32
    coords: np.ndarray | None = None  # (n, 2) float32
    chromatic: np.ndarray | None = None  # (n, 3) float32

    def __len__(self) -> int:
        return self.embeddings.shape[0]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]


def write_feature_file(path, embeddings, coords=None, chromatic=None) -> None:
    """Write a patch feature file; layout documented in the module docstring."""
    emb = np.ascontiguousarray(embeddings, dtype="<f4")
    if emb.ndim != 2:
        raise ValueError("embeddings must be a 2-D array")
    if not np.all(np.isfinite(emb)):
        raise ValueError("embeddings contain non-finite values")
    n, d = emb.shape
    flags = 0
    blocks = []
    if coords is not None:
        xy = np.ascontiguousarray(coords, dtype="<f4")
        if xy.shape != (n, 2):
            raise ValueError(f"coords must have shape ({n}, 2), got {xy.shape}")
        if not np.all(np.isfinite(xy)):
            raise ValueError("coords contain non-finite values")
        flags |= FLAG_COORDS
        blocks.append(xy)
    if chromatic is not None:
        ch = np.ascontiguousarray(chromatic, dtype="<f4")
        if ch.shape != (n, 3):
            raise ValueError(f"chromatic must have shape ({n}, 3), got {ch.shape}")
        if not np.all(np.isfinite(ch)):
            raise ValueError("chromatic contains non-finite values")
        flags |= FLAG_CHROMATIC
        blocks.append(ch)
    blocks.append(emb)
    rows = np.concatenate(blocks, axis=1) if len(blocks) > 1 else emb
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC_FEATURES, flags, n, d))
        fh.write(np.ascontiguousarray(rows, dtype="<f4").tobytes())


def read_feature_file(path) -> PatchSet:
    """Read a patch feature file written by :func:`write_feature_file`."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise DataError(f"feature file not found: {path}") from None
    if len(raw) < _HEADER.size:
        raise DataError(f"truncated feature file: {path}")
    magic, flags, n, d = _HEADER.unpack_from(raw)
    if magic != MAGIC_FEATURES:
        raise DataError(f"bad magic in feature file {path}: {magic!r}")
    has_coords = bool(flags & FLAG_COORDS)
    has_chroma = bool(flags & FLAG_CHROMATIC)
    width = 2 * has_coords + 3 * has_chroma + d
    expected = _HEADER.size + 4 * n * width
    if len(raw) != expected:
        raise DataError(
            f"feature file {path} has {len(raw)} bytes, expected {expected}"
        )
    rows = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(n, width)
    if not np.all(np.isfinite(rows)):
        raise DataError(f"feature file {path} contains non-finite values")
    col = 0
    coords = chroma = None
    if has_coords:
        coords = np.array(rows[:, col:col + 2])
        col += 2
    if has_chroma:
        chroma = np.array(rows[:, col:col + 3])
        col += 3
    return PatchSet(embeddings=np.array(rows[:, col:]), coords=coords,
                    chromatic=chroma)


def write_slide_vector(path, vector) -> None:
    vec = np.asarray(vector, dtype="<f4").reshape(1, -1)
    write_feature_file(path, vec)


def read_slide_vector(path) -> np.ndarray:
    """Read a slide-vector file: one row, no coordinate/chromatic blocks."""
    ps = read_feature_file(path)
    if len(ps) != 1 or ps.coords is not None or ps.chromatic is not None:
        raise DataError(f"not a slide-vector file (n=1, no extra blocks): {path}")
    return ps.embeddings[0]
