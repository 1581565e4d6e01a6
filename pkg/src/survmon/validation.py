"""Input validation helpers for the array-facing API."""

from __future__ import annotations

import numpy as np


def check_samples_array(X, n_parts, expect_input=None):
    """Validate a sample matrix with columns (x1, x2, z_1..z_N[, u1, u2]).

    Returns (X, has_input). Row count is free; column count must match
    either the input-free or the with-input layout (or the one forced by
    expect_input).
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError("sample array must be two-dimensional")
    if not np.all(np.isfinite(X)):
        raise ValueError("sample array contains non-finite values")
    base = 2 + n_parts
    if expect_input is True:
        if X.shape[1] != base + 2:
            raise ValueError(f"expected {base + 2} columns (with input), got {X.shape[1]}")
        return X, True
    if expect_input is False:
        if X.shape[1] != base:
            raise ValueError(f"expected {base} columns (no input), got {X.shape[1]}")
        return X, False
    if X.shape[1] == base + 2:
        return X, True
    if X.shape[1] == base:
        return X, False
    raise ValueError(
        f"expected {base} or {base + 2} columns for {n_parts} parts, got {X.shape[1]}")


def check_vector(v, length, name):
    v = np.asarray(v, dtype=float)
    if v.shape != (length,):
        raise ValueError(f"{name} must be a vector of length {length}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite values")
    return v
