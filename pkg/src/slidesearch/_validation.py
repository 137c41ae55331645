"""Small input-validation helpers used by the estimators and core functions."""

from __future__ import annotations

import numpy as np


def as_float_array(x, name: str = "x", ndim: int | None = None,
                   dtype=np.float64) -> np.ndarray:
    """Convert to a finite float ndarray, optionally enforcing ndim."""
    arr = np.asarray(x, dtype=dtype)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got ndim={arr.ndim}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_equal_length(u: np.ndarray, v: np.ndarray,
                       name_u: str = "u", name_v: str = "v") -> None:
    if u.shape != v.shape:
        raise ValueError(
            f"{name_u} and {name_v} must have the same shape, "
            f"got {u.shape} vs {v.shape}"
        )


def check_rate(rate: float, name: str = "rate") -> float:
    rate = float(rate)
    if not 0.0 < rate <= 1.0:
        raise ValueError(f"{name} must lie in (0, 1], got {rate}")
    return rate


def check_positive_int(value, name: str) -> int:
    ival = int(value)
    if ival < 1:
        raise ValueError(f"{name} must be >= 1, got {value}")
    return ival
