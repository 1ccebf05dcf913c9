"""Vehicle detection on the PCA-reduced amplitude stream.

A sample is an outlier when it deviates from the series mean by more than
``mad_multiplier`` scaled median absolute deviations.  Maximal outlier
runs of at least ``omega`` samples become detections; each detection is
widened by ``delta1`` samples before and ``delta2`` after, and the
amplitude/phase rows for all antenna pairs are sliced out over that
window.  Runs whose widened window would touch either trace edge are
dropped.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import erfcinv
from sklearn.base import BaseEstimator

from ._validation import as_float_array
from .classes import VehicleClass
from .errors import FormatError, PayloadLengthError

#: Consistency constant -1 / (sqrt(2) * erfcinv(3/2));  makes the MAD an
#: unbiased estimate of the standard deviation under normality (~1.4826).
C_MAD = float(-1.0 / (np.sqrt(2.0) * erfcinv(1.5)))

PHASE_REDUCTIONS = ("mean", "subcarrier", "pca")


@dataclass(frozen=True)
class DetectorParams:
    """Detection thresholds and window widths (all in samples).

    ``center`` selects what the deviation is measured against; the default
    "mean" pairs a mean-centered threshold with the median-based MAD.
    ``phase_reduction`` selects how a pair's 30 sanitized phase streams
    collapse to the single row stored per event.
    """

    mad_multiplier: float = 3.0
    omega: int = 1250
    delta1: int = 500
    delta2: int = 500
    detection_pair: int = 0
    center: str = "mean"
    phase_reduction: str = "mean"
    phase_subcarrier: int = 0

    def __post_init__(self):
        if self.mad_multiplier <= 0:
            raise ValueError("mad_multiplier must be positive")
        if min(self.omega, self.delta1, self.delta2) <= 0:
            raise ValueError("omega, delta1 and delta2 must be positive")
        if self.center not in ("mean", "median"):
            raise ValueError(f"center must be 'mean' or 'median', got {self.center!r}")
        if self.phase_reduction not in PHASE_REDUCTIONS:
            raise ValueError(f"phase_reduction must be one of {PHASE_REDUCTIONS}")


@dataclass
class DetectionEvent:
    """One extracted vehicle passage.

    ``amplitude_rows``/``phase_rows`` hold one row per antenna pair over
    the widened window [start_index, end_index].  ``lane`` and
    ``vehicle_class`` are ground truth when known; ``predicted_class`` and
    ``class_probs`` are filled by a classifier.
    """

    start_index: int
    end_index: int
    amplitude_rows: np.ndarray  # (n_pairs, window)
    phase_rows: np.ndarray  # (n_pairs, window)
    lane: int | None = None
    vehicle_class: VehicleClass | None = None
    predicted_class: VehicleClass | None = None
    class_probs: np.ndarray | None = None

    def __post_init__(self):
        self.amplitude_rows = np.asarray(self.amplitude_rows, dtype=np.float64)
        self.phase_rows = np.asarray(self.phase_rows, dtype=np.float64)
        window = self.end_index - self.start_index + 1
        if self.start_index < 0 or window < 1:
            raise ValueError("require 0 <= start_index <= end_index")
        for name, rows in (("amplitude_rows", self.amplitude_rows),
                           ("phase_rows", self.phase_rows)):
            if rows.ndim != 2 or rows.shape[1] != window:
                raise ValueError(
                    f"{name} must be (n_pairs, {window}), got {rows.shape}"
                )

    @property
    def window_length(self) -> int:
        return self.end_index - self.start_index + 1


def scaled_mad(series) -> float:
    """Median absolute deviation scaled by the consistency constant."""
    x = as_float_array(series, "series", ndim=1)
    if x.size == 0:
        raise ValueError("series must be nonempty")
    return C_MAD * float(np.median(np.abs(x - np.median(x))))


def detect_outliers(series, mad_multiplier=3.0, center="mean") -> np.ndarray:
    """Boolean mask of samples more than ``mad_multiplier`` scaled MADs
    away from the series mean (or median when ``center='median'``).

    When the scaled MAD is zero, every deviating sample is flagged.
    """
    x = as_float_array(series, "series", ndim=1)
    threshold = mad_multiplier * scaled_mad(x)
    if not np.isfinite(threshold):
        raise ValueError("scaled MAD is not finite")
    ref = np.mean(x) if center == "mean" else np.median(x)
    return np.abs(x - ref) > threshold


def _outlier_runs(mask: np.ndarray):
    """Yield (start, stop) of maximal True runs, stop inclusive."""
    idx = np.flatnonzero(np.diff(np.concatenate(([False], mask, [False])).astype(np.int8)))
    starts, stops = idx[::2], idx[1::2] - 1
    return list(zip(starts.tolist(), stops.tolist()))


def reduce_phase_rows(phase_matrices, params: DetectorParams) -> np.ndarray:
    """Collapse per-pair (N, 30) sanitized phases to per-pair rows (n_pairs, N)."""
    phases = np.asarray(phase_matrices, dtype=np.float64)
    if phases.ndim != 3:
        raise ValueError(f"phase matrices must be (n_pairs, N, 30), got {phases.shape}")
    if params.phase_reduction == "mean":
        return phases.mean(axis=2)
    if params.phase_reduction == "subcarrier":
        return phases[:, :, params.phase_subcarrier]
    # "pca": first principal component of each pair's sanitized phases
    from .preprocessing import pca_denoise

    return np.stack([pca_denoise(p, k=1).projected[:, 0] for p in phases])


def extract_events(
    amplitude_streams,
    phase_matrices,
    params: DetectorParams | None = None,
) -> list[DetectionEvent]:
    """Scan the detection stream's outlier mask and slice out events.

    ``amplitude_streams`` is (n_pairs, N): one PCA-reduced stream per
    antenna pair.  ``phase_matrices`` is (n_pairs, N, 30): sanitized
    phases.  The mask is computed on the stream of ``params.detection_pair``
    only; other pairs contribute rows to the extracted events.
    """
    if params is None:
        params = DetectorParams()
    streams = np.asarray(amplitude_streams, dtype=np.float64)
    if streams.ndim != 2:
        raise ValueError(f"amplitude streams must be (n_pairs, N), got {streams.shape}")
    n = streams.shape[1]
    phase_rows = reduce_phase_rows(phase_matrices, params)
    if phase_rows.shape != streams.shape:
        raise ValueError(
            f"phase rows {phase_rows.shape} do not match amplitude streams {streams.shape}"
        )
    if n <= params.delta1 + params.delta2 + params.omega:
        raise ValueError(
            f"stream length {n} must exceed delta1 + delta2 + omega = "
            f"{params.delta1 + params.delta2 + params.omega}"
        )
    if not 0 <= params.detection_pair < streams.shape[0]:
        raise IndexError(f"detection_pair {params.detection_pair} out of range")

    mask = detect_outliers(
        streams[params.detection_pair], params.mad_multiplier, params.center
    )
    events = []
    for s, f in _outlier_runs(mask):
        if f - s + 1 < params.omega:
            continue
        start = s - params.delta1
        end = f + params.delta2
        if not (start > 0 and end < n):
            continue
        events.append(
            DetectionEvent(
                start_index=start,
                end_index=end,
                amplitude_rows=streams[:, start : end + 1].copy(),
                phase_rows=phase_rows[:, start : end + 1].copy(),
            )
        )
    return events


class VehicleDetector(BaseEstimator):
    """Estimator-style wrapper around :func:`extract_events`."""

    def __init__(
        self,
        mad_multiplier=3.0,
        omega=1250,
        delta1=500,
        delta2=500,
        detection_pair=0,
        center="mean",
        phase_reduction="mean",
        phase_subcarrier=0,
    ):
        self.mad_multiplier = mad_multiplier
        self.omega = omega
        self.delta1 = delta1
        self.delta2 = delta2
        self.detection_pair = detection_pair
        self.center = center
        self.phase_reduction = phase_reduction
        self.phase_subcarrier = phase_subcarrier

    def params(self) -> DetectorParams:
        return DetectorParams(
            mad_multiplier=self.mad_multiplier,
            omega=self.omega,
            delta1=self.delta1,
            delta2=self.delta2,
            detection_pair=self.detection_pair,
            center=self.center,
            phase_reduction=self.phase_reduction,
            phase_subcarrier=self.phase_subcarrier,
        )

    def fit(self, X=None, y=None):
        self.params()  # validate
        return self

    def transform(self, amplitude_streams, phase_matrices):
        return extract_events(amplitude_streams, phase_matrices, self.params())


def save_events(events, path) -> None:
    """Write events as NDJSON plus a binary row sidecar.

    The JSON line per event holds the window and optional labels; the
    sidecar (same path with a ``.bin`` suffix) holds each event's
    amplitude rows then phase rows as little-endian f32, row-major, in
    event order.  Row count and length are recoverable from the JSON.
    """
    path = Path(path)
    lines = []
    blobs = []
    for ev in events:
        obj = {
            "start_index": int(ev.start_index),
            "end_index": int(ev.end_index),
            "n_pairs": int(ev.amplitude_rows.shape[0]),
        }
        if ev.lane is not None:
            obj["lane"] = int(ev.lane)
        if ev.vehicle_class is not None:
            obj["class"] = VehicleClass(ev.vehicle_class).short_name
        if ev.predicted_class is not None:
            obj["pred_class"] = VehicleClass(ev.predicted_class).short_name
        if ev.class_probs is not None:
            obj["probs"] = [float(p) for p in ev.class_probs]
        lines.append(json.dumps(obj, sort_keys=True))
        blobs.append(np.ascontiguousarray(ev.amplitude_rows).astype("<f4").tobytes())
        blobs.append(np.ascontiguousarray(ev.phase_rows).astype("<f4").tobytes())
    path.write_text("\n".join(lines) + ("\n" if lines else ""))
    sidecar_path(path).write_bytes(b"".join(blobs))


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".bin")


def load_events(path) -> list[DetectionEvent]:
    """Read events written by :func:`save_events`."""
    path = Path(path)
    raw = sidecar_path(path).read_bytes()
    events = []
    offset = 0
    for i, line in enumerate(path.read_text().splitlines()):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            start, end = int(obj["start_index"]), int(obj["end_index"])
            n_pairs = int(obj.get("n_pairs", 3))
        except (KeyError, ValueError, json.JSONDecodeError) as exc:
            raise FormatError(f"bad event on line {i + 1} of {path}: {exc}") from exc
        window = end - start + 1
        n_bytes = n_pairs * window * 4
        if offset + 2 * n_bytes > len(raw):
            raise PayloadLengthError(
                f"event sidecar truncated at event {len(events)} of {path}"
            )
        amp = np.frombuffer(raw, dtype="<f4", count=n_pairs * window, offset=offset)
        offset += n_bytes
        ph = np.frombuffer(raw, dtype="<f4", count=n_pairs * window, offset=offset)
        offset += n_bytes
        events.append(
            DetectionEvent(
                start_index=start,
                end_index=end,
                amplitude_rows=amp.reshape(n_pairs, window).astype(np.float64),
                phase_rows=ph.reshape(n_pairs, window).astype(np.float64),
                lane=obj.get("lane"),
                vehicle_class=(
                    VehicleClass.from_name(obj["class"]) if "class" in obj else None
                ),
                predicted_class=(
                    VehicleClass.from_name(obj["pred_class"])
                    if "pred_class" in obj
                    else None
                ),
                class_probs=(
                    np.asarray(obj["probs"], dtype=np.float64)
                    if "probs" in obj
                    else None
                ),
            )
        )
    if offset != len(raw):
        raise PayloadLengthError(f"event sidecar for {path} has trailing bytes")
    return events
