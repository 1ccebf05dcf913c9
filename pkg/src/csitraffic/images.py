"""Fixed-size classifier input images built from detection events.

An event's three amplitude rows and three phase rows are each linearly
resampled to ``WINDOW_SIZE`` columns and standardized to zero mean and
unit variance per row, producing the 6 x 2500 matrix the classifier
consumes.  The six rows stay time-aligned; the per-row offset/scale used
for standardization is kept as metadata.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

WINDOW_SIZE = 2500
N_ROWS = 6

#: Rows with standard deviation below this are treated as constant.
_DEGENERATE_STD = 1e-12


@dataclass(frozen=True)
class ClassifierImage:
    """6 x 2500 standardized image plus the per-row offset/scale removed."""

    data: np.ndarray  # (6, 2500)
    offsets: np.ndarray  # (6,) row means before standardization
    scales: np.ndarray  # (6,) row stds before standardization (1.0 if constant)

    def __post_init__(self):
        if self.data.shape != (N_ROWS, WINDOW_SIZE):
            raise ValueError(f"image must be {N_ROWS} x {WINDOW_SIZE}, got {self.data.shape}")


def resample_row(row: np.ndarray, n_out: int = WINDOW_SIZE) -> np.ndarray:
    """Linear-interpolation resampling of a row to ``n_out`` samples.

    Exact for affine signals; the identity when the length already matches.
    """
    row = np.asarray(row, dtype=np.float64)
    n_in = row.shape[0]
    if n_in < 2:
        raise ValueError("row must have at least 2 samples")
    if n_in == n_out:
        return row.copy()
    positions = np.linspace(0.0, n_in - 1.0, n_out)
    return np.interp(positions, np.arange(n_in), row)


def form_image(event) -> ClassifierImage:
    """Build the classifier image for one event.

    Rows 0-2 are the amplitude rows (antenna pairs 0..2), rows 3-5 the
    phase rows, resampled to 2500 columns and standardized per row.
    Constant rows standardize to all-zero.
    """
    amp = np.asarray(event.amplitude_rows, dtype=np.float64)
    ph = np.asarray(event.phase_rows, dtype=np.float64)
    if amp.shape[0] != 3 or ph.shape[0] != 3:
        raise ValueError(
            f"expected 3 amplitude and 3 phase rows, got {amp.shape[0]} and {ph.shape[0]}"
        )
    if amp.shape[1] != ph.shape[1]:
        raise ValueError("amplitude and phase rows must share their length")
    if amp.shape[1] < 2:
        raise ValueError("event rows must have at least 2 samples")

    data = np.empty((N_ROWS, WINDOW_SIZE))
    offsets = np.empty(N_ROWS)
    scales = np.empty(N_ROWS)
    for i, row in enumerate(np.concatenate([amp, ph], axis=0)):
        resampled = resample_row(row)
        mean = resampled.mean()
        std = resampled.std()
        offsets[i] = mean
        if std < _DEGENERATE_STD:
            scales[i] = 1.0
            data[i] = 0.0
        else:
            scales[i] = std
            data[i] = (resampled - mean) / std
    if not np.all(np.isfinite(data)):
        raise ValueError("image contains non-finite entries")
    data.setflags(write=False)
    return ClassifierImage(data=data, offsets=offsets, scales=scales)
