"""Input validation helpers shared by the estimators and the functional API."""

from __future__ import annotations

import numpy as np

from .exceptions import InvalidInputError


def check_matrix(x, name: str = "x", *, dtype=float) -> np.ndarray:
    """Coerce to a finite 2-d float array, raising InvalidInputError otherwise."""
    arr = np.asarray(x, dtype=dtype)
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be a 2-d matrix, got ndim={arr.ndim}")
    if arr.size and not np.isfinite(arr).all():
        raise InvalidInputError(f"{name} contains non-finite entries")
    return arr


def check_square(x, name: str = "w") -> np.ndarray:
    arr = check_matrix(x, name)
    if arr.shape[0] != arr.shape[1]:
        raise InvalidInputError(f"{name} must be square, got shape {arr.shape}")
    return arr


def check_weights(x, name: str = "w") -> np.ndarray:
    """Validate a weighted adjacency matrix: square, finite, zero diagonal."""
    arr = check_square(x, name)
    if arr.size and np.abs(np.diagonal(arr)).max(initial=0.0) != 0.0:
        raise InvalidInputError(f"{name} must have a zero diagonal (no self-loops)")
    return arr


def check_data(x, name: str = "x", *, min_rows: int = 1, min_cols: int = 1) -> np.ndarray:
    arr = check_matrix(x, name)
    n, p = arr.shape
    if n < min_rows:
        raise InvalidInputError(f"{name} needs at least {min_rows} row(s), got {n}")
    if p < min_cols:
        raise InvalidInputError(f"{name} needs at least {min_cols} column(s), got {p}")
    return arr


def check_same_dim(a: int, b: int, what: str = "dimension") -> int:
    if a != b:
        raise InvalidInputError(f"{what} mismatch: {a} != {b}")
    return a
