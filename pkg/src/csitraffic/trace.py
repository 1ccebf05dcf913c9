"""Core CSI trace container, amplitude/phase extraction, and file I/O.

A trace holds the complex channel estimates for ``n_packets`` successive
packets over ``n_pairs`` TX-RX antenna pairs and 30 OFDM subcarriers.
Values are stored as 32-bit float pairs on disk (compact) and promoted to
complex128 in memory so downstream linear algebra has full headroom.

Trace file layout (little-endian)::

    magic "CSI1" | version u16 = 1 | n_packets u32 | n_pairs u8 |
    n_sub u8 = 30 | sample_rate_hz f64 |
    payload: n_packets * n_pairs * n_sub records of (re f32, im f32),
             packet-major, then pair, then subcarrier

Label files are newline-delimited JSON objects with keys ``event_id``,
``start_index``, ``end_index``, ``class`` and ``lane``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classes import VehicleClass
from .errors import FormatError, PayloadLengthError, UnsupportedShapeError

TRACE_MAGIC = b"CSI1"
TRACE_VERSION = 1
N_SUBCARRIERS = 30

_HEADER = struct.Struct("<4sHIBBd")
HEADER_SIZE = _HEADER.size  # 20 bytes


@dataclass(frozen=True)
class CsiTrace:
    """Immutable packet-indexed complex CSI tensor.

    Attributes
    ----------
    values : ndarray, shape (n_packets, n_pairs, 30), complex128
        Channel estimate per packet, antenna pair and subcarrier.
    sample_rate_hz : float
        Packet rate of the capture.
    """

    values: np.ndarray
    sample_rate_hz: float = 2500.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        if values.ndim != 3:
            raise ValueError(f"values must be 3-D, got shape {values.shape}")
        if values.shape[0] < 1:
            raise ValueError("trace must contain at least one packet")
        if values.shape[2] != N_SUBCARRIERS:
            raise UnsupportedShapeError(
                f"expected {N_SUBCARRIERS} subcarriers, got {values.shape[2]}"
            )
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_packets(self) -> int:
        return self.values.shape[0]

    @property
    def n_pairs(self) -> int:
        return self.values.shape[1]

    @property
    def n_sub(self) -> int:
        return self.values.shape[2]

    @property
    def duration_s(self) -> float:
        return self.n_packets / self.sample_rate_hz


@dataclass(frozen=True)
class GroundTruthLabel:
    """One labeled vehicle passage: packet window, class, and lane."""

    event_id: int
    start_index: int
    end_index: int
    vehicle_class: VehicleClass
    lane: int

    def __post_init__(self):
        if not 0 <= self.start_index < self.end_index:
            raise ValueError("require 0 <= start_index < end_index")
        if self.lane not in (1, 2):
            raise ValueError(f"lane must be 1 or 2, got {self.lane}")
        object.__setattr__(self, "vehicle_class", VehicleClass(self.vehicle_class))


def save_trace(trace: CsiTrace, path) -> None:
    """Write a trace in the binary format above. Deterministic bytes."""
    header = _HEADER.pack(
        TRACE_MAGIC,
        TRACE_VERSION,
        trace.n_packets,
        trace.n_pairs,
        trace.n_sub,
        float(trace.sample_rate_hz),
    )
    payload = np.ascontiguousarray(trace.values).astype("<c8").tobytes()
    Path(path).write_bytes(header + payload)


def load_trace(path) -> CsiTrace:
    """Read a trace written by :func:`save_trace`.

    Raises
    ------
    FormatError
        Bad magic or unsupported version.
    PayloadLengthError
        Payload size does not match the header.
    UnsupportedShapeError
        Subcarrier count other than 30.
    """
    raw = Path(path).read_bytes()
    if len(raw) < HEADER_SIZE:
        raise FormatError(f"file too short for trace header: {len(raw)} bytes")
    magic, version, n_packets, n_pairs, n_sub, sample_rate = _HEADER.unpack_from(raw)
    if magic != TRACE_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {TRACE_MAGIC!r}")
    if version != TRACE_VERSION:
        raise FormatError(f"unsupported trace version {version}")
    if n_sub != N_SUBCARRIERS:
        raise UnsupportedShapeError(f"expected {N_SUBCARRIERS} subcarriers, got {n_sub}")
    expected = n_packets * n_pairs * n_sub * 8
    payload = raw[HEADER_SIZE:]
    if len(payload) != expected:
        raise PayloadLengthError(
            f"payload is {len(payload)} bytes, header declares {expected}"
        )
    values = (
        np.frombuffer(payload, dtype="<c8")
        .reshape(n_packets, n_pairs, n_sub)
        .astype(np.complex128)
    )
    return CsiTrace(values=values, sample_rate_hz=sample_rate)


def extract_amplitude(trace: CsiTrace, pair: int) -> np.ndarray:
    """Per-packet amplitude matrix (n_packets, 30) for one antenna pair."""
    _check_pair(trace, pair)
    z = trace.values[:, pair, :]
    # sqrt(re^2 + im^2): exact at these magnitudes, and IEEE sqrt rounds
    # identically across implementations (unlike hypot variants)
    return np.sqrt(z.real**2 + z.imag**2)


def extract_phase(trace: CsiTrace, pair: int) -> np.ndarray:
    """Per-packet principal-value phase matrix in (-pi, pi].

    Zero-magnitude values map to phase 0; -pi is folded to +pi so the
    half-open principal range holds for every entry.
    """
    _check_pair(trace, pair)
    phase = np.angle(trace.values[:, pair, :])
    # np.angle returns -pi for negative reals; fold onto the +pi edge.
    phase[phase == -np.pi] = np.pi
    return phase


def _check_pair(trace: CsiTrace, pair: int) -> None:
    if not 0 <= pair < trace.n_pairs:
        raise IndexError(f"pair {pair} out of range [0, {trace.n_pairs})")


def save_labels(labels, path) -> None:
    """Write ground-truth labels as newline-delimited JSON."""
    lines = []
    for lab in labels:
        lines.append(
            json.dumps(
                {
                    "event_id": lab.event_id,
                    "start_index": lab.start_index,
                    "end_index": lab.end_index,
                    "class": lab.vehicle_class.short_name,
                    "lane": lab.lane,
                },
                sort_keys=True,
            )
        )
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def load_labels(path) -> list:
    labels = []
    for i, line in enumerate(Path(path).read_text().splitlines()):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            labels.append(
                GroundTruthLabel(
                    event_id=int(obj["event_id"]),
                    start_index=int(obj["start_index"]),
                    end_index=int(obj["end_index"]),
                    vehicle_class=VehicleClass.from_name(obj["class"]),
                    lane=int(obj["lane"]),
                )
            )
        except (KeyError, ValueError, json.JSONDecodeError) as exc:
            raise FormatError(f"bad label on line {i + 1} of {path}: {exc}") from exc
    return labels
