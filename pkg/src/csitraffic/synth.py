"""Seeded synthetic CSI trace generator with ground-truth labels.

Each passing vehicle multiplies the line-of-sight term of every antenna
pair by a smooth class-specific envelope excursion (a flat-topped bump
with a ripple; excursion sign, depth, duration scale and ripple are class
attributes) and perturbs the per-subcarrier phase slope.  On top of that
the generator adds a slow (< 2 Hz) multiplicative amplitude drift, a
faster above-cutoff amplitude flutter that the low-pass stage should
remove, and additive complex Gaussian noise.

Class excursion signs are balanced across the five classes so that a
trace with a roughly even class mix keeps its mean amplitude near the
quiet-road level; a one-sided (all dips) table at this event density
would push the quiet background itself beyond the mean-centered outlier
threshold used for detection.

Class templates are configuration data; the default table ships in
``data/signature_templates.json``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.signal.windows import tukey

from .classes import CLASS_NAMES, VehicleClass
from .errors import ScenarioError
from .trace import N_SUBCARRIERS, CsiTrace, GroundTruthLabel

N_PAIRS = 3

#: Fraction of each burst spent in the raised-cosine tapers (rest is flat).
BURST_TAPER = 0.3

#: Lane scaling: lane 1 passes closer to the receiver.
LANE_DEPTH_SCALE = {1: 1.0, 2: 0.85}
LANE_PHASE_SCALE = {1: 1.0, 2: 0.9}

MIN_EVENT_SPACING_S = 1.0
MIN_BURST_GAP_S = 0.5
EDGE_MARGIN_S = 0.6
MIN_BURST_SAMPLES = 1250  # bursts must outlast the detector's run threshold

DEFAULT_NOISE_SIGMA = 0.2
DEFAULT_SLOW_OBJECT_AMPLITUDE = 0.02
DEFAULT_SPEED_RANGE = (12.0, 15.0)


@dataclass(frozen=True)
class ScenarioEvent:
    time_s: float
    vehicle_class: VehicleClass
    lane: int
    speed_mps: float

    def __post_init__(self):
        object.__setattr__(self, "vehicle_class", VehicleClass(self.vehicle_class))


@dataclass(frozen=True)
class Scenario:
    """A synthetic capture: timeline of vehicle passages plus noise knobs."""

    duration_s: float
    events: tuple
    seed: int
    sample_rate_hz: float = 2500.0
    noise_sigma: float = DEFAULT_NOISE_SIGMA
    slow_object_amplitude: float = DEFAULT_SLOW_OBJECT_AMPLITUDE

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))

    def validate(self) -> None:
        if self.duration_s <= 0 or self.sample_rate_hz <= 0:
            raise ScenarioError("duration_s and sample_rate_hz must be positive")
        if self.noise_sigma < 0 or self.slow_object_amplitude < 0:
            raise ScenarioError("noise amplitudes must be >= 0")
        times = [ev.time_s for ev in self.events]
        for ev in self.events:
            if not 0 <= ev.time_s < self.duration_s:
                raise ScenarioError(f"event time {ev.time_s} outside [0, {self.duration_s})")
            if ev.speed_mps <= 2.0:
                raise ScenarioError(
                    f"speed {ev.speed_mps} m/s must exceed the 2 m/s slow-object bound"
                )
            if ev.lane not in (1, 2):
                raise ScenarioError(f"lane must be 1 or 2, got {ev.lane}")
        if any(t2 - t1 < MIN_EVENT_SPACING_S for t1, t2 in zip(times, times[1:])):
            raise ScenarioError(f"event times must be >= {MIN_EVENT_SPACING_S}s apart")
        if times != sorted(times):
            raise ScenarioError("events must be sorted by time")


@dataclass(frozen=True)
class SignatureTemplate:
    """Concrete per-pair burst parameters for one vehicle passage.

    ``amp_depth`` entries are signed: positive means the passage raises
    the amplitude, negative means a dip.
    """

    vehicle_class: VehicleClass
    duration_s: float
    amp_depth: tuple  # (3,) signed excursion per antenna pair
    ripple_hz: float
    ripple_depth: float
    ripple_phase: tuple  # (3,)
    phase_gain: tuple  # (3,) signed slope modulation per pair, rad/subcarrier
    phase_ripple_hz: float


def default_templates() -> dict:
    """Load the class template table shipped with the package."""
    text = resources.files("csitraffic.data").joinpath("signature_templates.json").read_text()
    return validate_templates(json.loads(text))


def load_templates(path) -> dict:
    return validate_templates(json.loads(Path(path).read_text()))


def validate_templates(table: dict) -> dict:
    missing = set(CLASS_NAMES) - set(table)
    if missing:
        raise ScenarioError(f"template table missing classes: {sorted(missing)}")
    lengths = {name: table[name]["length_m"] for name in CLASS_NAMES}
    ordered = (
        lengths["bike"] < lengths["car"]
        and lengths["car"] < min(lengths["suv"], lengths["pickup"])
        and max(lengths["suv"], lengths["pickup"]) < lengths["truck"]
    )
    if not ordered:
        raise ScenarioError("template durations must order bike < car < suv ~ pickup < truck")
    depths = {name: abs(table[name]["depth"]) for name in CLASS_NAMES}
    if not all(depths["truck"] > depths[n] for n in CLASS_NAMES if n != "truck"):
        raise ScenarioError("truck amplitude depth must be strictly largest")
    return table


def vehicle_signature(
    vehicle_class, speed_mps: float, lane: int, templates: dict | None = None
) -> SignatureTemplate:
    """Concrete burst template for one passage: duration scales as 1/speed,
    lane 1 is deeper than lane 2 for the same class."""
    if speed_mps <= 2.0:
        raise ValueError("speed must exceed 2 m/s")
    if lane not in (1, 2):
        raise ValueError(f"lane must be 1 or 2, got {lane}")
    vehicle_class = VehicleClass(vehicle_class)
    if templates is None:
        templates = default_templates()
    try:
        entry = templates[vehicle_class.short_name]
    except KeyError:
        raise ValueError(f"no template for class {vehicle_class.short_name!r}") from None
    depth = entry["polarity"] * entry["depth"] * LANE_DEPTH_SCALE[lane]
    gain = entry["phase_gain"] * LANE_PHASE_SCALE[lane]
    return SignatureTemplate(
        vehicle_class=vehicle_class,
        duration_s=entry["length_m"] / speed_mps,
        amp_depth=tuple(depth * s for s in entry["pair_depth_scale"]),
        ripple_hz=entry["ripple_hz"],
        ripple_depth=entry["ripple_depth"],
        ripple_phase=tuple(entry["ripple_phase"]),
        phase_gain=tuple(gain * s for s in entry["pair_phase_scale"]),
        phase_ripple_hz=entry["phase_ripple_hz"],
    )


def generate_trace(scenario: Scenario, templates: dict | None = None):
    """Render a scenario into a CSI trace plus exact ground-truth labels.

    Deterministic for a fixed scenario (the seed is part of it).

    Returns
    -------
    (CsiTrace, list[GroundTruthLabel])
    """
    scenario.validate()
    if templates is None:
        templates = default_templates()
    fs = scenario.sample_rate_hz
    n = int(round(scenario.duration_s * fs))
    rng = np.random.default_rng(np.uint64(scenario.seed & 0xFFFFFFFFFFFFFFFF))

    # Static channel realization per pair: amplitude profile across
    # subcarriers plus a linear phase ramp (receiver timing offset).
    pair_gain = rng.uniform(0.9, 1.1, N_PAIRS)
    profile_phase = rng.uniform(0.0, 2.0 * np.pi, N_PAIRS)
    sub = np.arange(N_SUBCARRIERS)
    gain = pair_gain[:, None] * (
        1.0 + 0.15 * np.cos(2.0 * np.pi * sub[None, :] / N_SUBCARRIERS + profile_phase[:, None])
    )
    base_slope = rng.uniform(-0.3, 0.3, N_PAIRS)
    base_offset = rng.uniform(-np.pi, np.pi, N_PAIRS)

    # Interference: sub-2 Hz drift (slow object) plus above-cutoff flutter.
    f_slow = rng.uniform(0.2, 1.5)
    f_fast = rng.uniform(150.0, 450.0)
    ph_slow = rng.uniform(0.0, 2.0 * np.pi)
    ph_fast = rng.uniform(0.0, 2.0 * np.pi)
    t = np.arange(n) / fs
    interference = scenario.slow_object_amplitude * np.sin(
        2.0 * np.pi * f_slow * t + ph_slow
    ) + 2.0 * scenario.slow_object_amplitude * np.sin(2.0 * np.pi * f_fast * t + ph_fast)

    envelope = np.ones((N_PAIRS, n))
    slope_mod = np.zeros((N_PAIRS, n))
    labels = []
    spans = []
    for event_id, ev in enumerate(scenario.events):
        sig = vehicle_signature(ev.vehicle_class, ev.speed_mps, ev.lane, templates)
        start = int(round(ev.time_s * fs))
        n_burst = int(round(sig.duration_s * fs))
        if n_burst <= MIN_BURST_SAMPLES:
            raise ScenarioError(
                f"event {event_id}: burst of {n_burst} samples is too short to detect "
                f"(needs > {MIN_BURST_SAMPLES}); lower the speed or use a longer class"
            )
        end = start + n_burst - 1
        spans.append((start, end))
        tau = np.arange(n_burst) / fs
        bump = tukey(n_burst, BURST_TAPER)
        for a in range(N_PAIRS):
            ripple = 1.0 + sig.ripple_depth * np.cos(
                2.0 * np.pi * sig.ripple_hz * tau + sig.ripple_phase[a]
            )
            envelope[a, start : end + 1] += sig.amp_depth[a] * bump * ripple
            slope_mod[a, start : end + 1] += (
                sig.phase_gain[a] * bump * np.cos(2.0 * np.pi * sig.phase_ripple_hz * tau)
            )
        labels.append(
            GroundTruthLabel(event_id, start, end, ev.vehicle_class, ev.lane)
        )

    edge = int(round(EDGE_MARGIN_S * fs))
    gap = int(round(MIN_BURST_GAP_S * fs))
    for i, (start, end) in enumerate(spans):
        if start < edge or end >= n - edge:
            raise ScenarioError(
                f"event {i}: burst [{start}, {end}] too close to the trace edge; "
                f"scenario duration too short for all events"
            )
        if i > 0 and start - spans[i - 1][1] < gap:
            raise ScenarioError(f"events {i - 1} and {i} overlap (burst gap < {gap} samples)")

    sub_index = np.arange(1, N_SUBCARRIERS + 1, dtype=np.float64)
    common = 1.0 + interference
    sigma = scenario.noise_sigma / np.sqrt(2.0)
    values = np.empty((n, N_PAIRS, N_SUBCARRIERS), dtype=np.complex128)
    for a in range(N_PAIRS):
        amp = (envelope[a] * common)[:, None] * gain[a][None, :]
        # Outside bursts the phase ramp is static; only burst samples need a
        # fresh complex exponential.
        base_vec = np.exp(1j * (base_offset[a] + base_slope[a] * sub_index))
        vals = amp * base_vec[None, :]
        active = np.flatnonzero(slope_mod[a])
        if active.size:
            vals[active, :] = amp[active, :] * np.exp(
                1j
                * (
                    base_offset[a]
                    + (base_slope[a] + slope_mod[a][active, None]) * sub_index[None, :]
                )
            )
        vals += sigma * rng.standard_normal((n, N_SUBCARRIERS))
        vals += 1j * sigma * rng.standard_normal((n, N_SUBCARRIERS))
        values[:, a, :] = vals

    return CsiTrace(values=values, sample_rate_hz=fs), labels


def random_scenario(
    n_events: int,
    seed: int,
    *,
    sample_rate_hz: float = 2500.0,
    noise_sigma: float = DEFAULT_NOISE_SIGMA,
    slow_object_amplitude: float = DEFAULT_SLOW_OBJECT_AMPLITUDE,
    speed_range=DEFAULT_SPEED_RANGE,
    templates: dict | None = None,
) -> Scenario:
    """Build a scenario with a balanced class mix and well-spaced events.

    Classes are dealt round-robin (shuffled), lanes alternate within each
    class, speeds are uniform in ``speed_range``, and consecutive bursts
    are separated by generous random gaps.  Layout randomness comes from
    ``seed`` alone; the same seed is reused by :func:`generate_trace` for
    the waveform noise.
    """
    if n_events < 1:
        raise ScenarioError("n_events must be >= 1")
    if templates is None:
        templates = default_templates()
    rng = np.random.default_rng(np.uint64((seed ^ 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF))

    class_cycle = [VehicleClass(i % len(CLASS_NAMES)) for i in range(n_events)]
    rng.shuffle(class_cycle)
    lane_toggle = {cls: (i % 2) + 1 for i, cls in enumerate(VehicleClass)}

    events = []
    cursor = EDGE_MARGIN_S + 0.3
    for cls in class_cycle:
        speed = rng.uniform(*speed_range)
        lane = lane_toggle[cls]
        lane_toggle[cls] = 3 - lane
        duration = templates[cls.short_name]["length_m"] / speed
        events.append(ScenarioEvent(round(cursor, 4), cls, lane, round(speed, 4)))
        cursor += duration + rng.uniform(1.0, 2.2)
    duration_s = cursor + EDGE_MARGIN_S + 0.3
    return Scenario(
        duration_s=round(duration_s, 2),
        events=tuple(events),
        seed=seed,
        sample_rate_hz=sample_rate_hz,
        noise_sigma=noise_sigma,
        slow_object_amplitude=slow_object_amplitude,
    )


def save_scenario(scenario: Scenario, path) -> None:
    obj = {
        "duration_s": scenario.duration_s,
        "sample_rate_hz": scenario.sample_rate_hz,
        "noise_sigma": scenario.noise_sigma,
        "slow_object_amplitude": scenario.slow_object_amplitude,
        "seed": scenario.seed,
        "events": [
            {
                "time_s": ev.time_s,
                "class": ev.vehicle_class.short_name,
                "lane": ev.lane,
                "speed_mps": ev.speed_mps,
            }
            for ev in scenario.events
        ],
    }
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def load_scenario(path, seed_override: int | None = None) -> Scenario:
    obj = json.loads(Path(path).read_text())
    events = tuple(
        ScenarioEvent(
            time_s=float(e["time_s"]),
            vehicle_class=VehicleClass.from_name(e["class"]),
            lane=int(e["lane"]),
            speed_mps=float(e["speed_mps"]),
        )
        for e in obj.get("events", [])
    )
    return Scenario(
        duration_s=float(obj["duration_s"]),
        events=events,
        seed=int(obj["seed"]) if seed_override is None else int(seed_override),
        sample_rate_hz=float(obj.get("sample_rate_hz", 2500.0)),
        noise_sigma=float(obj.get("noise_sigma", DEFAULT_NOISE_SIGMA)),
        slow_object_amplitude=float(
            obj.get("slow_object_amplitude", DEFAULT_SLOW_OBJECT_AMPLITUDE)
        ),
    )
