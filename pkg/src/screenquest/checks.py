"""Input validation helpers shared by the estimators and numeric routines."""

from __future__ import annotations

import numpy as np

WEIGHT_TOL = 1e-9


def as_float_array(x, name: str = "x") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_matrix(X, name: str = "X") -> np.ndarray:
    X = as_float_array(X, name)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {X.shape}")
    return X


def check_binary_matrix(X, name: str = "X") -> np.ndarray:
    X = check_matrix(X, name)
    if X.size and not np.isin(X, (0.0, 1.0)).all():
        raise ValueError(f"{name} must contain only 0/1 values")
    return X.astype(np.int8)


def check_binary_labels(y, n_rows: int | None = None, name: str = "y") -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional")
    vals = np.unique(y)
    if not np.isin(vals, (0, 1, False, True)).all():
        raise ValueError(f"{name} must contain only 0/1 labels")
    if n_rows is not None and len(y) != n_rows:
        raise ValueError(f"{name} has {len(y)} entries, expected {n_rows}")
    return y.astype(np.int8)


def check_weights(w, name: str = "weights") -> np.ndarray:
    """Validate a probability vector: non-negative, sums to 1 within tolerance."""
    w = as_float_array(w, name)
    if w.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional")
    if len(w) == 0:
        raise ValueError(f"{name} is empty")
    if (w < -WEIGHT_TOL).any():
        raise ValueError(f"{name} contains negative entries")
    total = float(w.sum())
    if abs(total - 1.0) > WEIGHT_TOL:
        raise ValueError(f"{name} sums to {total!r}, expected 1.0")
    return np.clip(w, 0.0, None)


def check_distance_matrix(D, name: str = "distance matrix", tol: float = 1e-9) -> np.ndarray:
    D = check_matrix(D, name)
    n, m = D.shape
    if n != m:
        raise ValueError(f"{name} must be square, got {D.shape}")
    if n and np.abs(np.diagonal(D)).max() > tol:
        raise ValueError(f"{name} must have a zero diagonal")
    if n and np.abs(D - D.T).max() > tol:
        raise ValueError(f"{name} must be symmetric")
    if n and D.min() < -tol:
        raise ValueError(f"{name} contains negative distances")
    return D
