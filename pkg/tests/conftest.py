"""Shared fixtures: the synthetic benchmark corpora are expensive, so they
are built once per session and only when a test asks for them."""

import os
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from csitraffic.detection import DetectorParams, extract_events
from csitraffic.evaluation import match_events
from csitraffic.features import extract_baseline_features
from csitraffic.images import form_image
from csitraffic.preprocessing import preprocess_trace
from csitraffic.synth import generate_trace, random_scenario

DETECTION_SEED = 20_1000
CLASSIFY_SEED = 42_000
TRAIN_SEED = 7


def run_detection(seed, events_per_trace=10):
    """Generate one seeded trace and run the full detection pipeline."""
    scenario = random_scenario(events_per_trace, seed=seed)
    trace, labels = generate_trace(scenario)
    prep = preprocess_trace(trace)
    events = extract_events(prep.streams, prep.phases, DetectorParams())
    return trace, labels, events


@pytest.fixture(scope="session")
def detection_benchmark():
    """20 seeded traces x 10 events: per-trace (labels, events) plus wall time."""
    workers = min(4, os.cpu_count() or 1)
    t0 = time.time()

    def worker(seed):
        scenario = random_scenario(10, seed=seed)
        trace, labels = generate_trace(scenario)
        prep = preprocess_trace(trace)
        events = extract_events(prep.streams, prep.phases, DetectorParams())
        return labels, [(ev.start_index, ev.end_index) for ev in events]

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(worker, range(DETECTION_SEED, DETECTION_SEED + 20)))
    elapsed = time.time() - t0
    return {"results": results, "elapsed_s": elapsed}


@pytest.fixture(scope="session")
def classification_dataset():
    """500 labeled events (100 per class) pushed through the full pipeline."""

    def worker(seed):
        scenario = random_scenario(10, seed=seed)
        trace, labels = generate_trace(scenario)
        prep = preprocess_trace(trace)
        events = extract_events(prep.streams, prep.phases, DetectorParams())
        matching = match_events(events, labels)
        rows = []
        for di, li in matching.pairs:
            ev = events[di]
            ev.vehicle_class = labels[li].vehicle_class
            ev.lane = labels[li].lane
            rows.append(
                (
                    form_image(ev).data,
                    int(labels[li].vehicle_class),
                    extract_baseline_features(ev, trace.sample_rate_hz).as_array(),
                    labels[li].lane,
                )
            )
        return rows

    workers = min(4, os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        batches = list(pool.map(worker, range(CLASSIFY_SEED, CLASSIFY_SEED + 50)))
    rows = [r for batch in batches for r in batch]
    images = np.stack([r[0] for r in rows])
    labels = np.array([r[1] for r in rows])
    features = np.stack([r[2] for r in rows])
    lanes = np.array([r[3] for r in rows])
    return {"images": images, "labels": labels, "features": features, "lanes": lanes}


@pytest.fixture(scope="session")
def trained_cnn(classification_dataset):
    """CNN trained on the benchmark dataset with the default configuration."""
    from csitraffic.cnn import TrainConfig, cnn_train

    t0 = time.time()
    model, history = cnn_train(
        classification_dataset["images"],
        classification_dataset["labels"],
        TrainConfig(seed=TRAIN_SEED),
    )
    elapsed = time.time() - t0
    return {"model": model, "history": history, "elapsed_s": elapsed}
