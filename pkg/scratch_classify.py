# Classification tuning scratchpad: build the 500-event dataset through the
# full pipeline, then measure centroid/kNN/CNN accuracy. Not part of the package.
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from csitraffic.detection import DetectorParams, extract_events
from csitraffic.evaluation import match_events
from csitraffic.features import extract_baseline_features
from csitraffic.images import form_image
from csitraffic.preprocessing import preprocess_trace
from csitraffic.synth import generate_trace, random_scenario


def one_trace(seed):
    sc = random_scenario(10, seed=seed)
    trace, labels = generate_trace(sc)
    pp = preprocess_trace(trace)
    events = extract_events(pp.streams, pp.phases, DetectorParams())
    matching = match_events(events, labels)
    out = []
    for di, li in matching.pairs:
        ev = events[di]
        ev.vehicle_class = labels[li].vehicle_class
        ev.lane = labels[li].lane
        out.append((form_image(ev).data, int(labels[li].vehicle_class),
                    extract_baseline_features(ev, trace.sample_rate_hz).as_array(),
                    labels[li].lane))
    return out


def build(n_traces=50, base_seed=42000):
    t0 = time.time()
    with ThreadPoolExecutor(max_workers=2) as ex:
        results = list(ex.map(one_trace, range(base_seed, base_seed + n_traces)))
    rows = [r for res in results for r in res]
    X = np.stack([r[0] for r in rows])
    y = np.array([r[1] for r in rows])
    F = np.stack([r[2] for r in rows])
    lanes = np.array([r[3] for r in rows])
    print(f"dataset: {len(y)} events in {time.time()-t0:.0f}s; per class {np.bincount(y)}")
    return X, y, F, lanes


def main():
    X, y, F, lanes = build()
    np.savez_compressed("/tmp/clsdata.npz", X=X.astype(np.float32), y=y, F=F, lanes=lanes)

    # nearest centroid on images
    cents = np.stack([X[y == c].mean(axis=0) for c in range(5)])
    d = ((X[:, None] - cents[None]) ** 2).sum(axis=(2, 3))
    nc = (d.argmin(axis=1) == y).mean()
    print(f"nearest-centroid accuracy: {nc:.3f}")

    # kNN on features, 70/30
    rng = np.random.default_rng(0)
    tr, te = [], []
    for c in range(5):
        idx = np.flatnonzero(y == c)
        idx = idx[rng.permutation(len(idx))]
        n_val = int(round(0.3 * len(idx)))
        te.extend(idx[:n_val]); tr.extend(idx[n_val:])
    tr, te = np.array(tr), np.array(te)
    from csitraffic.features import KnnBaselineClassifier
    knn = KnnBaselineClassifier(k=5).fit(F[tr], y[tr])
    ka = (knn.predict(F[te]) == y[te]).mean()
    print(f"kNN(5) holdout accuracy: {ka:.3f}")

    # confusion of knn
    pred = knn.predict(F[te])
    conf = np.zeros((5, 5), int)
    for t, p in zip(y[te], pred):
        conf[t, p] += 1
    print(conf)


if __name__ == "__main__":
    main()
