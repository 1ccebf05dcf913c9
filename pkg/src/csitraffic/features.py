"""Hand-crafted baseline features and the kNN reference classifier.

Five statistics of an event's pair-0 amplitude row: normalized standard
deviation, signal-strength offset against the quiet-trace baseline,
motion period (event duration in seconds), scaled MAD, and interquartile
range.  The kNN classifier votes among the k nearest neighbours in
z-score-standardized feature space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .classes import VehicleClass
from .detection import scaled_mad
from .errors import DataError


@dataclass(frozen=True)
class FeatureVector:
    normalized_std: float
    signal_strength_offset: float
    motion_period: float
    mad: float
    iqr: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                self.normalized_std,
                self.signal_strength_offset,
                self.motion_period,
                self.mad,
                self.iqr,
            ]
        )


def extract_baseline_features(
    event, sample_rate_hz: float = 2500.0, baseline: float = 0.0
) -> FeatureVector:
    """Compute the five baseline features on the event's pair-0 amplitude row.

    ``baseline`` is the full-trace mean of the detection stream; the
    PCA-reduced stream is zero-mean by construction, hence the default 0.
    """
    row = np.asarray(event.amplitude_rows[0], dtype=np.float64)
    if row.size < 4:
        raise ValueError(f"event row must have >= 4 samples, got {row.size}")
    mean = float(row.mean())
    if mean == 0.0:
        raise ValueError("event row has zero mean magnitude")
    q25, q75 = np.percentile(row, [25.0, 75.0])  # linear-interpolation quantiles
    return FeatureVector(
        normalized_std=float(row.std()) / abs(mean),
        signal_strength_offset=mean - baseline,
        motion_period=row.size / sample_rate_hz,
        mad=scaled_mad(row),
        iqr=float(q75 - q25),
    )


def _standardize(train: np.ndarray):
    mean = train.mean(axis=0)
    std = train.std(axis=0)
    std = np.where(std > 0.0, std, 1.0)
    return mean, std


def knn_classify(train_features, train_labels, query, k: int) -> VehicleClass:
    """Majority vote among the k nearest training points (Euclidean, in
    z-score space).  Ties break by smallest mean distance, then lowest
    class ordinal."""
    train = np.asarray(
        [f.as_array() if isinstance(f, FeatureVector) else f for f in train_features],
        dtype=np.float64,
    )
    labels = np.asarray([int(lab) for lab in train_labels])
    if train.size == 0:
        raise DataError("empty training set")
    if not 1 <= k <= len(train):
        raise ValueError(f"k must lie in [1, {len(train)}], got {k}")
    q = query.as_array() if isinstance(query, FeatureVector) else np.asarray(query)
    mean, std = _standardize(train)
    dist = np.linalg.norm((train - mean) / std - (q - mean) / std, axis=1)
    nearest = np.argsort(dist, kind="stable")[:k]
    votes = labels[nearest]
    counts = np.bincount(votes, minlength=5)
    top = counts.max()
    tied = np.flatnonzero(counts == top)
    if len(tied) > 1:
        mean_dist = [dist[nearest[votes == cls]].mean() for cls in tied]
        tied = tied[np.flatnonzero(mean_dist == np.min(mean_dist))]
    return VehicleClass(int(tied.min()))


class KnnBaselineClassifier(ClassifierMixin, BaseEstimator):
    """fit/predict wrapper storing training features and their z-scoring."""

    def __init__(self, k=5):
        self.k = k

    def fit(self, X, y):
        self.X_ = np.asarray(
            [f.as_array() if isinstance(f, FeatureVector) else f for f in X],
            dtype=np.float64,
        )
        self.y_ = np.asarray([int(lab) for lab in y])
        if self.X_.size == 0:
            raise DataError("empty training set")
        if not 1 <= self.k <= len(self.X_):
            raise ValueError(f"k must lie in [1, {len(self.X_)}]")
        return self

    def predict(self, X):
        return np.asarray(
            [int(knn_classify(self.X_, self.y_, q, self.k)) for q in np.asarray(X)]
        )
