"""Command-line surface for the pipeline.

Subcommands: generate, preprocess, detect, train, classify, evaluate,
plot.  Exit codes: 0 success, 1 usage error, 2 data/format error,
3 numerical divergence during training.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .classes import GROUP_SCHEMES
from .cnn import TrainConfig, cnn_forward, cnn_train, load_model, save_model
from .detection import DetectorParams, extract_events, load_events, save_events
from .errors import CsiTrafficError, TrainingDivergedError
from .evaluation import EvalReport, evaluate, fuse_max_prob, match_events, save_report
from .features import extract_baseline_features  # noqa: F401  (re-export for scripts)
from .images import form_image
from .preprocessing import FilterSpec, preprocess_trace
from .synth import generate_trace, load_scenario
from .trace import load_labels, load_trace, save_labels, save_trace

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DIVERGED = 3


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; we use 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="csitraffic", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="render a scenario into a trace + labels")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("preprocess", help="filter + PCA + phase sanitize a trace to CSV")
    p.add_argument("--trace", required=True)
    p.add_argument("--out", required=True, help="output CSV of per-pair series")
    p.add_argument("--filter-mode", choices=["lowpass", "highpass"], default="lowpass")
    p.add_argument("--pca-k", type=int, default=1)
    p.add_argument("--cutoff-hz", type=float, default=38.0)

    p = sub.add_parser("detect", help="extract per-vehicle events from a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--labels", default=None, help="attach ground truth from this file")
    p.add_argument("--out", required=True, help="output events NDJSON (+ .bin sidecar)")
    p.add_argument("--omega", type=int, default=1250)
    p.add_argument("--delta1", type=int, default=500)
    p.add_argument("--delta2", type=int, default=500)
    p.add_argument("--mad-multiplier", type=float, default=3.0)

    p = sub.add_parser("train", help="train the CNN on labeled event files")
    p.add_argument("--events", required=True, help="directory of event NDJSON files")
    p.add_argument("--out", required=True, help="output model file")
    p.add_argument("--lane", choices=["1", "2", "all"], default="all")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--batch", type=int, default=16)

    p = sub.add_parser("classify", help="attach class predictions to events")
    p.add_argument("--events", required=True, help="directory of event NDJSON files")
    p.add_argument("--model", required=True)
    p.add_argument("--model2", default=None, help="second (per-lane) model")
    p.add_argument("--fuse", choices=["max-prob"], default="max-prob")
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate", help="score classified events against truth")
    p.add_argument("--pred", required=True, help="classified events file")
    p.add_argument("--truth", required=True, help="ground-truth label file")
    p.add_argument("--scheme", choices=list(GROUP_SCHEMES), default="five")
    p.add_argument("--report", required=True, help="output report JSON")
    p.add_argument("--repeat", type=int, default=0,
                   help="additionally resample 30%% test subsets this many times")
    p.add_argument("--repeat-seed", type=int, default=0)

    p = sub.add_parser("plot", help="render a CSV of series to an SVG line chart")
    p.add_argument("--series", required=True, help="CSV with a header row")
    p.add_argument("--out", required=True, help="output SVG path")

    return parser


def _cmd_generate(args) -> int:
    scenario = load_scenario(args.scenario, seed_override=args.seed)
    trace, labels = generate_trace(scenario)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_trace(trace, out / "trace.csi")
    save_labels(labels, out / "labels.ndjson")
    print(f"wrote {out / 'trace.csi'} ({trace.n_packets} packets, {len(labels)} events)")
    return EXIT_OK


def _cmd_preprocess(args) -> int:
    trace = load_trace(args.trace)
    spec = FilterSpec(
        cutoff_hz=args.cutoff_hz,
        sample_rate_hz=trace.sample_rate_hz,
        mode=args.filter_mode,
    )
    prep = preprocess_trace(trace, spec, pca_k=args.pca_k)
    columns = []
    header = []
    for a, result in enumerate(prep.pca):
        for j in range(result.projected.shape[1]):
            header.append(f"amp_pca{j}_pair{a}")
            columns.append(result.projected[:, j])
    for a in range(prep.phases.shape[0]):
        header.append(f"phase_pair{a}")
        columns.append(prep.phases[a].mean(axis=1))
    data = np.column_stack(columns)
    np.savetxt(args.out, data, fmt="%.10g", delimiter=",",
               header=",".join(header), comments="")
    print(f"wrote {args.out} ({data.shape[0]} rows x {data.shape[1]} series)")
    return EXIT_OK


def _cmd_detect(args) -> int:
    trace = load_trace(args.trace)
    params = DetectorParams(
        mad_multiplier=args.mad_multiplier,
        omega=args.omega,
        delta1=args.delta1,
        delta2=args.delta2,
    )
    prep = preprocess_trace(trace)
    events = extract_events(prep.streams, prep.phases, params)
    if args.labels:
        truth = load_labels(args.labels)
        matching = match_events(events, truth)
        for di, li in matching.pairs:
            events[di].vehicle_class = truth[li].vehicle_class
            events[di].lane = truth[li].lane
    save_events(events, args.out)
    print(f"wrote {args.out} ({len(events)} events)")
    return EXIT_OK


def _load_event_dir(directory):
    paths = sorted(Path(directory).glob("*.ndjson"))
    if not paths:
        raise CsiTrafficError(f"no .ndjson event files in {directory}")
    events = []
    for path in paths:
        events.extend(load_events(path))
    return events


def _cmd_train(args) -> int:
    events = _load_event_dir(args.events)
    if args.lane != "all":
        events = [ev for ev in events if ev.lane == int(args.lane)]
    labeled = [ev for ev in events if ev.vehicle_class is not None]
    if not labeled:
        raise CsiTrafficError("no labeled events to train on")
    images = np.stack([form_image(ev).data for ev in labeled])
    classes = np.array([int(ev.vehicle_class) for ev in labeled])
    config = TrainConfig(
        learning_rate=args.lr,
        momentum=args.momentum,
        epochs=args.epochs,
        batch_size=args.batch,
        seed=args.seed,
    )
    model, history = cnn_train(images, classes, config)
    save_model(model, args.out)
    print(
        f"wrote {args.out} (trained {len(history['loss'])} epochs on {len(labeled)} "
        f"events, best validation accuracy {max(history['val_accuracy']):.3f})"
    )
    return EXIT_OK


def _cmd_classify(args) -> int:
    events = _load_event_dir(args.events)
    model = load_model(args.model)
    second = load_model(args.model2) if args.model2 else None
    for ev in events:
        probs = cnn_forward(model, form_image(ev))
        if second is not None:
            probs = fuse_max_prob(probs, cnn_forward(second, form_image(ev)))
        ev.class_probs = probs
        ev.predicted_class = int(probs.argmax())
    save_events(events, args.out)
    print(f"wrote {args.out} ({len(events)} classified events)")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    predictions = load_events(args.pred)
    truth = load_labels(args.truth)
    report = evaluate(predictions, truth, scheme=args.scheme)
    if args.repeat > 0:
        report.repeated = _repeat_resample(
            predictions, truth, args.repeat, args.repeat_seed
        )
    save_report(report, args.report)
    acc = report.classification_accuracy[args.scheme]
    print(
        f"detection {report.detection_accuracy:.4f} "
        f"({report.n_detected}/{report.n_passing}, {report.n_false_positive} false positives); "
        f"{args.scheme} accuracy {acc:.4f}"
    )
    return EXIT_OK


def _repeat_resample(predictions, truth, n_repeat, seed, fraction=0.30):
    """Mean accuracy over repeated 30% test-subset resamples (no retraining)."""
    matching = match_events(predictions, truth)
    pairs = list(matching.pairs)
    rng = np.random.default_rng(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
    sums = {s: 0.0 for s in GROUP_SCHEMES}
    n_take = max(1, int(round(fraction * len(pairs))))
    from .classes import group_prediction

    for _ in range(n_repeat):
        take = rng.choice(len(pairs), size=n_take, replace=False)
        for s in GROUP_SCHEMES:
            hits = 0
            for t in take:
                di, li = pairs[t]
                hits += group_prediction(predictions[di].predicted_class, s) == group_prediction(
                    truth[li].vehicle_class, s
                )
            sums[s] += hits / n_take
    return {
        "n": n_repeat,
        "fraction": fraction,
        "mean_accuracy": {s: sums[s] / n_repeat for s in GROUP_SCHEMES},
    }


def _cmd_plot(args) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with open(args.series) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(args.series, delimiter=",", skiprows=1, ndmin=2)
    fig, ax = plt.subplots(figsize=(10, 4))
    for i, name in enumerate(header):
        ax.plot(data[:, i], label=name, linewidth=0.8)
    ax.set_xlabel("packet index")
    ax.legend(loc="upper right", fontsize="small")
    fig.tight_layout()
    fig.savefig(args.out, format="svg", metadata={"Date": None})
    plt.close(fig)
    print(f"wrote {args.out}")
    return EXIT_OK


_COMMANDS = {
    "generate": _cmd_generate,
    "preprocess": _cmd_preprocess,
    "detect": _cmd_detect,
    "train": _cmd_train,
    "classify": _cmd_classify,
    "evaluate": _cmd_evaluate,
    "plot": _cmd_plot,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (CsiTrafficError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
