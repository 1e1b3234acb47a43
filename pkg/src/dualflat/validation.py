"""Input checks shared by the estimators and the command line."""
from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .exp_family import MAX_UNITS, state_bits

__all__ = ["check_binary_samples", "check_positive", "check_unit_count",
           "check_fraction", "empirical_distribution", "mix_uniform", "states_to_index"]


def check_unit_count(n) -> int:
    if not isinstance(n, numbers.Integral) or isinstance(n, bool):
        raise TypeError(f"number of units must be an integer, got {n!r}")
    if not 1 <= n <= MAX_UNITS:
        raise ValueError(f"number of units must be in [1, {MAX_UNITS}], got {n}")
    return int(n)


def check_positive(name: str, value) -> float:
    value = float(value)
    if not (np.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return value


def check_fraction(name: str, value) -> float:
    value = float(value)
    if not 0 <= value < 1:
        raise ValueError(f"{name} must lie in [0, 1), got {value!r}")
    return value


def check_binary_samples(X, n_features: int | None = None) -> np.ndarray:
    """2-D array of 0/1 samples, one column per unit."""
    X = check_array(X, dtype=None, ensure_2d=True)
    if not np.all((X == 0) | (X == 1)):
        raise ValueError("samples must contain only 0 and 1")
    X = X.astype(np.int64)
    check_unit_count(X.shape[1])
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"X has {X.shape[1]} features, expected {n_features}")
    return X


def states_to_index(X) -> np.ndarray:
    """State index with bit i holding column i."""
    X = np.asarray(X, dtype=np.int64)
    return X @ (1 << np.arange(X.shape[1], dtype=np.int64))


def empirical_distribution(X, sample_weight=None) -> np.ndarray:
    X = check_binary_samples(X)
    idx = states_to_index(X)
    if sample_weight is None:
        w = np.ones(len(idx))
    else:
        w = np.asarray(sample_weight, dtype=float).reshape(-1)
        if w.shape[0] != len(idx) or np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("sample_weight must be finite, nonnegative, one per sample")
        if w.sum() <= 0:
            raise ValueError("sample_weight sums to zero")
    counts = np.bincount(idx, weights=w, minlength=1 << X.shape[1])
    return counts / counts.sum()


def mix_uniform(q: np.ndarray, alpha: float) -> np.ndarray:
    """(1 - alpha) q + alpha * uniform; keeps the moments strictly interior."""
    return (1.0 - alpha) * q + alpha / q.shape[0]
