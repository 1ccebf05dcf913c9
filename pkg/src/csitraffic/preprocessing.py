"""Noise removal and dimension reduction for CSI amplitude and phase data.

Three stages:

* zero-phase low-pass filtering of the per-subcarrier amplitude streams,
* PCA over the 30 subcarrier streams of one antenna pair, reducing them to
  a single denoised stream (the first principal component),
* per-packet phase sanitization that removes the receiver timing offset
  (linear-in-subcarrier trend) and phase offset (constant) from measured
  phases.

Everything here is a pure function; thin sklearn-style transformer
wrappers are provided so the stages compose with ordinary pipelines.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import as_float_array, check_finite, check_subcarrier_matrix

N_SUBCARRIERS = 30

#: Subcarrier indices 1..30 used by the sanitization transform.
_SUB_INDEX = np.arange(1, N_SUBCARRIERS + 1, dtype=np.float64)


@dataclass(frozen=True)
class FilterSpec:
    """Low/high-pass filter contract.

    The realized filter must keep passband ripple <= 1 dB below
    ``0.8 * cutoff_hz`` and attenuate >= 20 dB above ``2.5 * cutoff_hz``
    (mirrored for ``mode="highpass"``), with zero phase distortion.
    """

    cutoff_hz: float = 38.0
    sample_rate_hz: float = 2500.0
    mode: str = "lowpass"
    order: int = 4

    def __post_init__(self):
        if not 0 < self.cutoff_hz < self.sample_rate_hz / 2:
            raise ValueError(
                f"cutoff {self.cutoff_hz} Hz must lie in (0, {self.sample_rate_hz / 2})"
            )
        if self.mode not in ("lowpass", "highpass"):
            raise ValueError(f"mode must be 'lowpass' or 'highpass', got {self.mode!r}")
        if self.order < 1:
            raise ValueError("order must be >= 1")


def _design_sos(spec: FilterSpec) -> np.ndarray:
    # The filter runs forward-backward, which doubles the attenuation in dB
    # and would push the passband edge past the 1 dB bound at the printed
    # cutoff.  Scale the design cutoff so the *combined* -3 dB point sits at
    # spec.cutoff_hz; both contract bounds then hold with margin.
    ratio = (10.0 ** 0.15 - 1.0) ** (1.0 / (2.0 * spec.order))
    if spec.mode == "lowpass":
        design_cutoff = spec.cutoff_hz / ratio
    else:
        design_cutoff = spec.cutoff_hz * ratio
    design_cutoff = min(design_cutoff, 0.99 * spec.sample_rate_hz / 2)
    return signal.butter(
        spec.order, design_cutoff, btype=spec.mode, fs=spec.sample_rate_hz, output="sos"
    )


def filter_min_length(spec: FilterSpec) -> int:
    """Shortest series :func:`lowpass_filter` accepts (filtfilt warm-up)."""
    sos = _design_sos(spec)
    n_sections = sos.shape[0]
    return 3 * (2 * n_sections + 1) + 1


def lowpass_filter(series, spec: FilterSpec | None = None) -> np.ndarray:
    """Zero-phase filter a series (or the columns of a matrix).

    Cascaded second-order maximally-flat IIR sections applied forward and
    backward, so the output has no phase distortion and its length equals
    the input length.
    """
    if spec is None:
        spec = FilterSpec()
    x = as_float_array(series, "series")
    if x.ndim not in (1, 2):
        raise ValueError(f"series must be 1-D or 2-D, got shape {x.shape}")
    min_len = filter_min_length(spec)
    if x.shape[0] < min_len:
        raise ValueError(
            f"series length {x.shape[0]} below filter warm-up length {min_len}"
        )
    sos = _design_sos(spec)
    return signal.sosfiltfilt(sos, x, axis=0)


@dataclass(frozen=True)
class PcaResult:
    """Eigendecomposition of one antenna pair's subcarrier streams.

    ``projected[:, 0]`` is the single denoised stream used downstream.
    """

    components: np.ndarray  # (30, k), orthonormal columns
    eigenvalues: np.ndarray  # (k,), nonincreasing
    projected: np.ndarray  # (N, k)
    column_means: np.ndarray  # (30,)


def pca_denoise(amplitudes, k: int = 1) -> PcaResult:
    """PCA over the 30 subcarrier amplitude streams of one antenna pair.

    Column means are subtracted, the covariance is formed as ``H^T @ H``
    (no 1/N normalization), and the centered matrix is projected onto the
    ``k`` leading eigenvectors.  Each eigenvector's largest-magnitude entry
    is made positive so results are deterministic up to that convention.
    """
    h = check_subcarrier_matrix(amplitudes, "amplitudes")
    n = h.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 packets for PCA, got {n}")
    if not 1 <= k <= N_SUBCARRIERS:
        raise ValueError(f"k must lie in [1, {N_SUBCARRIERS}], got {k}")
    column_means = h.mean(axis=0)
    centered = h - column_means
    cov = centered.T @ centered
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = eigenvalues[order][:k]
    components = eigenvectors[:, order][:, :k]
    # Sign convention: flip each eigenvector so its largest-|entry| is positive.
    flip = np.sign(components[np.argmax(np.abs(components), axis=0), np.arange(k)])
    flip[flip == 0] = 1.0
    components = components * flip
    projected = centered @ components
    return PcaResult(
        components=components,
        eigenvalues=eigenvalues,
        projected=projected,
        column_means=column_means,
    )


def unwrap_subcarrier_phase(phases) -> np.ndarray:
    """Unwrap phases along the subcarrier axis (rows are packets)."""
    p = np.asarray(phases, dtype=np.float64)
    return np.unwrap(p, axis=-1)


def sanitize_phase(measured) -> np.ndarray:
    """Remove timing and phase offsets from one packet's 30 subcarrier phases.

    The input is unwrapped along the subcarrier axis, then transformed as

        out_f = phi_f - e1 * f - e2,   f = 1..30

    with ``e1 = (phi_30 - phi_1) / (2 * pi * 30)`` (timing offset slope)
    and ``e2 = mean(phi)`` (phase offset).
    """
    phi = as_float_array(measured, "measured")
    if phi.shape != (N_SUBCARRIERS,):
        raise ValueError(f"expected a length-{N_SUBCARRIERS} vector, got {phi.shape}")
    check_finite(phi, "measured")
    return _sanitize_rows(phi[None, :])[0]


def sanitize_phase_matrix(phases) -> np.ndarray:
    """Apply :func:`sanitize_phase` to every packet (row) independently."""
    phi = check_subcarrier_matrix(phases, "phases")
    check_finite(phi, "phases")
    return _sanitize_rows(phi)


def _sanitize_rows(phi: np.ndarray) -> np.ndarray:
    # Unwrap only rows with an actual wrap; most rows have none and the
    # scan is much cheaper than np.unwrap's temporaries.
    wrapped = (np.abs(np.diff(phi, axis=1)) > np.pi).any(axis=1)
    if wrapped.any():
        unwrapped = phi.copy()
        unwrapped[wrapped] = np.unwrap(phi[wrapped], axis=1)
    else:
        unwrapped = phi
    e1 = (unwrapped[:, -1] - unwrapped[:, 0]) / (2.0 * np.pi * N_SUBCARRIERS)
    # phi_f - mean(phi) grouped as (F*phi_f - sum(phi)) / F: adding a
    # constant to every phase then cancels before any rounding, keeping the
    # transform exactly shift-invariant whenever the shift itself is exact
    sums = unwrapped.sum(axis=1)
    centered = (N_SUBCARRIERS * unwrapped - sums[:, None]) / N_SUBCARRIERS
    return centered - e1[:, None] * _SUB_INDEX


@dataclass(frozen=True)
class PreprocessedTrace:
    """Per-pair denoised detection streams and sanitized phases.

    ``streams[a]`` is antenna pair ``a``'s first principal component of the
    filtered subcarrier amplitudes; ``phases[a]`` its sanitized (N, 30)
    phase matrix; ``pca[a]`` the full decomposition.
    """

    streams: np.ndarray  # (n_pairs, N)
    phases: np.ndarray  # (n_pairs, N, 30)
    pca: tuple  # one PcaResult per pair


def preprocess_trace(trace, spec: FilterSpec | None = None, pca_k: int = 1) -> PreprocessedTrace:
    """Run the amplitude and phase preprocessing chain on a whole trace.

    Amplitudes of all antenna pairs are filtered in one call (the filter is
    column-independent), then PCA-reduced per pair; phases are sanitized
    per pair.
    """
    if spec is None:
        spec = FilterSpec(sample_rate_hz=trace.sample_rate_hz)
    n, n_pairs, n_sub = trace.values.shape
    amps = np.sqrt(trace.values.real**2 + trace.values.imag**2)
    filtered = lowpass_filter(amps.reshape(n, n_pairs * n_sub), spec).reshape(
        n, n_pairs, n_sub
    )
    pca = tuple(pca_denoise(filtered[:, a, :], k=pca_k) for a in range(n_pairs))
    streams = np.stack([r.projected[:, 0] for r in pca])
    raw_phase = np.angle(trace.values)
    raw_phase[raw_phase == -np.pi] = np.pi
    phases = np.stack(
        [sanitize_phase_matrix(raw_phase[:, a, :]) for a in range(n_pairs)]
    )
    return PreprocessedTrace(streams=streams, phases=phases, pca=pca)


class LowpassFilter(BaseEstimator, TransformerMixin):
    """Stateless transformer applying :func:`lowpass_filter` column-wise."""

    def __init__(self, cutoff_hz=38.0, sample_rate_hz=2500.0, mode="lowpass", order=4):
        self.cutoff_hz = cutoff_hz
        self.sample_rate_hz = sample_rate_hz
        self.mode = mode
        self.order = order

    def _spec(self) -> FilterSpec:
        return FilterSpec(
            cutoff_hz=self.cutoff_hz,
            sample_rate_hz=self.sample_rate_hz,
            mode=self.mode,
            order=self.order,
        )

    def fit(self, X, y=None):
        self._spec()  # validate parameters
        return self

    def transform(self, X):
        return lowpass_filter(X, self._spec())


class PcaDenoiser(BaseEstimator, TransformerMixin):
    """PCA reduction of 30 subcarrier streams to ``n_components`` streams."""

    def __init__(self, n_components=1):
        self.n_components = n_components

    def fit(self, X, y=None):
        result = pca_denoise(X, k=self.n_components)
        self.components_ = result.components
        self.eigenvalues_ = result.eigenvalues
        self.column_means_ = result.column_means
        return self

    def transform(self, X):
        h = check_subcarrier_matrix(X, "X")
        return (h - self.column_means_) @ self.components_

    def fit_transform(self, X, y=None):
        result = pca_denoise(X, k=self.n_components)
        self.components_ = result.components
        self.eigenvalues_ = result.eigenvalues
        self.column_means_ = result.column_means
        return result.projected


class PhaseSanitizer(BaseEstimator, TransformerMixin):
    """Stateless transformer applying :func:`sanitize_phase_matrix`."""

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        return sanitize_phase_matrix(X)
