# Tuning scratchpad: run generator + preprocessing + detection end to end
# and report margins. Not part of the package.
import sys
import time

import numpy as np

from csitraffic.detection import DetectorParams, detect_outliers, extract_events, scaled_mad
from csitraffic.preprocessing import FilterSpec, lowpass_filter, pca_denoise, sanitize_phase_matrix
from csitraffic.synth import generate_trace, random_scenario
from csitraffic.trace import extract_amplitude, extract_phase


def pipeline(trace, pca_k=1):
    streams = []
    phases = []
    spec = FilterSpec(sample_rate_hz=trace.sample_rate_hz)
    for pair in range(trace.n_pairs):
        amp = extract_amplitude(trace, pair)
        filt = lowpass_filter(amp, spec)
        streams.append(pca_denoise(filt, k=pca_k).projected[:, 0])
        phases.append(sanitize_phase_matrix(extract_phase(trace, pair)))
    return np.stack(streams), np.stack(phases)


def main(n_traces=20, events_per_trace=10, base_seed=1000):
    params = DetectorParams()
    total_truth = 0
    total_matched = 0
    total_fp = 0
    t0 = time.time()
    worst_bg = np.inf   # min over traces of thr / bg_max
    worst_ev = np.inf   # min over events of sustained-run margin
    worst_runfrac = np.inf
    for i in range(n_traces):
        sc = random_scenario(events_per_trace, seed=base_seed + i)
        trace, labels = generate_trace(sc)
        streams, phases = pipeline(trace)
        events = extract_events(streams, phases, params)
        matched = set()
        fp = 0
        for ev in events:
            hit = None
            for j, lab in enumerate(labels):
                if j in matched:
                    continue
                if ev.start_index <= lab.end_index and lab.start_index <= ev.end_index:
                    hit = j
                    break
            if hit is None:
                fp += 1
            else:
                matched.add(hit)
        total_truth += len(labels)
        total_matched += len(matched)
        total_fp += fp

        s = streams[0]
        thr = params.mad_multiplier * scaled_mad(s)
        dev = np.abs(s - s.mean())
        bg = np.ones(len(s), bool)
        for lab in labels:
            bg[max(0, lab.start_index - 700) : lab.end_index + 700] = False
        bg_max = dev[bg].max()
        worst_bg = min(worst_bg, thr / bg_max)
        # per event: longest within-label run of dev > thr, and the minimum
        # dev over the central 60% of the label window (sustain margin)
        for lab in labels:
            w = dev[lab.start_index : lab.end_index + 1]
            m = w > thr
            runs = np.flatnonzero(np.diff(np.concatenate(([0], m.view(np.int8), [0]))))
            longest = max((b - a for a, b in zip(runs[::2], runs[1::2])), default=0)
            worst_runfrac = min(worst_runfrac, longest / params.omega)
            nb = len(w)
            mid = w[int(0.25 * nb) : int(0.75 * nb)]
            worst_ev = min(worst_ev, mid.min() / thr)
        if len(matched) < len(labels) or fp:
            print(f"  trace {i}: matched {len(matched)}/{len(labels)} fp={fp} thr={thr:.3f}")
    dt = time.time() - t0
    print(
        f"traces={n_traces} events={total_truth} matched={total_matched} "
        f"recall={total_matched / total_truth:.4f} fp={total_fp} time={dt:.1f}s "
        f"({dt / n_traces:.2f}s/trace)"
    )
    print(
        f"margins: thr/bg_max min={worst_bg:.2f}  central-dev/thr min={worst_ev:.2f}  "
        f"run/omega min={worst_runfrac:.2f}"
    )


if __name__ == "__main__":
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 20
    main(n_traces=n)
