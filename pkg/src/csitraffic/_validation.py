"""Small input-validation helpers shared by the estimators and functions."""

from __future__ import annotations

import numpy as np

N_SUBCARRIERS = 30


def as_float_array(x, name="array", ndim=None):
    arr = np.asarray(x, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    return arr


def check_finite(arr, name="array"):
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_subcarrier_matrix(x, name="matrix"):
    """Validate an (N, 30) per-packet subcarrier matrix."""
    arr = as_float_array(x, name, ndim=2)
    if arr.shape[1] != N_SUBCARRIERS:
        raise ValueError(
            f"{name} must have {N_SUBCARRIERS} columns, got {arr.shape[1]}"
        )
    return arr
