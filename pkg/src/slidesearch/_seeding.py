"""Deterministic per-stage seed derivation.

All randomness in a benchmark run flows from one master seed. Stage- and
item-level seeds are derived by hashing ``master:tag1:tag2:...`` so they do
not depend on iteration order and stay stable across partial re-runs.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master: int, *tags: object) -> int:
    """Return a stable 32-bit seed for ``(master, tags...)``."""
    text = ":".join([str(int(master)), *(str(t) for t in tags)])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


def rng_for(master: int, *tags: object) -> np.random.Generator:
    """Generator seeded via :func:`derive_seed`."""
    return np.random.default_rng(derive_seed(master, *tags))
