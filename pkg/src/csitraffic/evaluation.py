"""End-to-end pipeline runner, event/label matching, and accuracy metrics.

Detection accuracy is (matched detections) / (passing vehicles);
classification accuracy is (correct among matched) / (matched), computed
for the five-class labels and for each coarser grouping scheme.
Unmatched detections are false positives and never enter the
classification denominators.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classes import GROUP_SCHEMES, N_CLASSES, VehicleClass, group_prediction
from .cnn import CnnModel, cnn_forward
from .detection import DetectorParams, extract_events
from .errors import PipelineStageError
from .images import form_image
from .preprocessing import FilterSpec, preprocess_trace


@dataclass(frozen=True)
class Matching:
    """One-to-one greedy matching between detections and truth labels."""

    pairs: tuple  # (detection_index, label_index)
    false_positive_indices: tuple  # unmatched detections
    missed_label_indices: tuple  # unmatched labels


def match_events(detected, truth) -> Matching:
    """Greedy one-to-one matching by interval overlap.

    Both lists must be sorted by start index.  Each detection takes the
    unmatched overlapping label with the largest overlap (earlier label on
    ties); detections with no overlapping label are false positives.
    """
    matched_labels = set()
    pairs = []
    false_pos = []
    for di, det in enumerate(detected):
        d_start, d_end = det.start_index, det.end_index
        best = None
        best_overlap = 0
        for li, lab in enumerate(truth):
            if li in matched_labels:
                continue
            if lab.start_index > d_end:
                break
            overlap = min(d_end, lab.end_index) - max(d_start, lab.start_index) + 1
            if overlap > best_overlap:
                best, best_overlap = li, overlap
        if best is None:
            false_pos.append(di)
        else:
            matched_labels.add(best)
            pairs.append((di, best))
    missed = tuple(i for i in range(len(truth)) if i not in matched_labels)
    return Matching(
        pairs=tuple(pairs),
        false_positive_indices=tuple(false_pos),
        missed_label_indices=tuple(missed),
    )


@dataclass
class EvalReport:
    """Detection and classification accuracies plus the confusion matrix.

    ``confusion`` stays in the five-class space regardless of scheme
    (rows = truth, columns = prediction); scheme accuracies are computed
    after mapping both sides through the grouping.
    """

    scheme: str
    n_passing: int
    n_detected: int
    n_false_positive: int
    detection_accuracy: float
    classification_accuracy: dict  # scheme -> accuracy over matched events
    confusion: np.ndarray  # (5, 5) counts
    per_lane: dict  # lane -> {"n_detected": int, "accuracy": {scheme: float}}
    repeated: dict | None = None  # optional repeated-resampling summary

    def to_dict(self) -> dict:
        obj = {
            "scheme": self.scheme,
            "n_passing": self.n_passing,
            "n_detected": self.n_detected,
            "n_false_positive": self.n_false_positive,
            "detection_accuracy": self.detection_accuracy,
            "classification_accuracy": self.classification_accuracy,
            "confusion": self.confusion.tolist(),
            "per_lane": self.per_lane,
        }
        if self.repeated is not None:
            obj["repeated"] = self.repeated
        return obj

    @classmethod
    def from_dict(cls, obj: dict) -> "EvalReport":
        return cls(
            scheme=obj["scheme"],
            n_passing=int(obj["n_passing"]),
            n_detected=int(obj["n_detected"]),
            n_false_positive=int(obj["n_false_positive"]),
            detection_accuracy=float(obj["detection_accuracy"]),
            classification_accuracy={
                k: float(v) for k, v in obj["classification_accuracy"].items()
            },
            confusion=np.asarray(obj["confusion"], dtype=np.int64),
            per_lane={
                str(k): {
                    "n_detected": int(v["n_detected"]),
                    "accuracy": {s: float(a) for s, a in v["accuracy"].items()},
                }
                for k, v in obj["per_lane"].items()
            },
            repeated=obj.get("repeated"),
        )


def save_report(report: EvalReport, path) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")


def load_report(path) -> EvalReport:
    return EvalReport.from_dict(json.loads(Path(path).read_text()))


def evaluate(predictions, truth, scheme: str = "five") -> EvalReport:
    """Score classed detections against ground-truth labels.

    ``predictions`` are events carrying ``predicted_class``; ``truth`` is
    the label list.  Both must be sorted by start index.
    """
    if scheme not in GROUP_SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}, expected one of {GROUP_SCHEMES}")
    if len(truth) == 0:
        raise ValueError("zero passing vehicles; accuracy undefined")
    matching = match_events(predictions, truth)
    n_detected = len(matching.pairs)
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    scheme_hits = {s: 0 for s in GROUP_SCHEMES}
    lane_stats = {}
    for di, li in matching.pairs:
        pred = predictions[di].predicted_class
        true = truth[li].vehicle_class
        if pred is None:
            raise ValueError(f"detection {di} carries no predicted class")
        confusion[int(true), int(pred)] += 1
        lane = str(truth[li].lane)
        stats = lane_stats.setdefault(lane, {"n": 0, "hits": {s: 0 for s in GROUP_SCHEMES}})
        stats["n"] += 1
        for s in GROUP_SCHEMES:
            hit = group_prediction(pred, s) == group_prediction(true, s)
            scheme_hits[s] += hit
            stats["hits"][s] += hit
    accuracy = {
        s: (scheme_hits[s] / n_detected if n_detected else 0.0) for s in GROUP_SCHEMES
    }
    per_lane = {
        lane: {
            "n_detected": stats["n"],
            "accuracy": {s: stats["hits"][s] / stats["n"] for s in GROUP_SCHEMES},
        }
        for lane, stats in sorted(lane_stats.items())
    }
    return EvalReport(
        scheme=scheme,
        n_passing=len(truth),
        n_detected=n_detected,
        n_false_positive=len(matching.false_positive_indices),
        detection_accuracy=n_detected / len(truth),
        classification_accuracy=accuracy,
        confusion=confusion,
        per_lane=per_lane,
    )


@dataclass(frozen=True)
class PipelineConfig:
    """Stage configuration for :func:`run_pipeline`."""

    filter_cutoff_hz: float = 38.0
    filter_mode: str = "lowpass"
    pca_k: int = 1
    detector: DetectorParams = field(default_factory=DetectorParams)


def fuse_max_prob(probs_a: np.ndarray, probs_b: np.ndarray) -> np.ndarray:
    """Pick, per event, whichever model's distribution is more confident."""
    return probs_a if probs_a.max() >= probs_b.max() else probs_b


def run_pipeline(trace, model: CnnModel | None, config: PipelineConfig | None = None,
                 second_model: CnnModel | None = None):
    """Extract, filter, reduce, detect and classify one trace.

    Returns the detection events with class probabilities attached (when a
    model is given).  ``second_model`` enables max-probability fusion
    across two (per-lane) models.  Stage failures are re-raised annotated
    with the stage name.
    """
    if config is None:
        config = PipelineConfig()

    def _stage(name, fn):
        try:
            return fn()
        except Exception as exc:  # noqa: BLE001 - annotate and re-raise
            raise PipelineStageError(name, exc) from exc

    spec = FilterSpec(
        cutoff_hz=config.filter_cutoff_hz,
        sample_rate_hz=trace.sample_rate_hz,
        mode=config.filter_mode,
    )
    prep = _stage("preprocess", lambda: preprocess_trace(trace, spec, config.pca_k))
    events = _stage(
        "detect", lambda: extract_events(prep.streams, prep.phases, config.detector)
    )
    if model is None:
        return events
    for ev in events:
        image = _stage("form_image", lambda ev=ev: form_image(ev))
        probs = _stage("classify", lambda image=image: cnn_forward(model, image))
        if second_model is not None:
            probs2 = _stage(
                "classify", lambda image=image: cnn_forward(second_model, image)
            )
            probs = fuse_max_prob(probs, probs2)
        ev.class_probs = probs
        ev.predicted_class = VehicleClass(int(probs.argmax()))
    return events
