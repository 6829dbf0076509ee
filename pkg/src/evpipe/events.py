"""Core event types and stream algebra.

Streams are stored column-wise (one numpy array per field) because every
consumer downstream is vectorised or JIT-compiled over flat arrays.
Timestamps are integer microseconds; polarity is stored as -1/+1.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import NamedTuple, Optional

import numpy as np

T_DTYPE = np.int64
XY_DTYPE = np.int32
P_DTYPE = np.int8
LABEL_DTYPE = np.uint8


class Label(IntEnum):
    SIGNAL = 0
    NOISE = 1


class Event(NamedTuple):
    t: int
    x: int
    y: int
    p: int


@dataclass(frozen=True)
class SensorGeometry:
    width: int
    height: int

    def __post_init__(self):
        if int(self.width) < 1 or int(self.height) < 1:
            raise ValueError(f"sensor geometry must be at least 1x1, got {self.width}x{self.height}")
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))

    @property
    def pixel_count(self) -> int:
        return self.width * self.height

    def contains(self, other: "SensorGeometry") -> bool:
        return self.width >= other.width and self.height >= other.height


def _frozen(arr, dtype):
    out = np.ascontiguousarray(arr, dtype=dtype)
    if out.ndim != 1:
        raise ValueError("event fields must be one-dimensional")
    if out.base is not None or out.flags.writeable:
        out = out.copy()
    out.setflags(write=False)
    return out


class EventStream:
    """Time-ordered events on a sensor.

    The constructor only coerces dtypes and checks the columns line up; use
    :func:`validate` to check ordering and bounds.
    """

    __slots__ = ("geometry", "t", "x", "y", "p")

    def __init__(self, geometry, t, x, y, p):
        if not isinstance(geometry, SensorGeometry):
            geometry = SensorGeometry(*geometry)
        t = _frozen(t, T_DTYPE)
        x = _frozen(x, XY_DTYPE)
        y = _frozen(y, XY_DTYPE)
        p = _frozen(p, P_DTYPE)
        if not (len(t) == len(x) == len(y) == len(p)):
            raise ValueError("event columns have different lengths")
        object.__setattr__(self, "geometry", geometry)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "p", p)

    def __setattr__(self, name, value):
        raise AttributeError("EventStream is immutable")

    @classmethod
    def empty(cls, geometry) -> "EventStream":
        return cls(geometry, [], [], [], [])

    @classmethod
    def from_events(cls, events, geometry) -> "EventStream":
        events = list(events)
        if not events:
            return cls.empty(geometry)
        t, x, y, p = zip(*events)
        return cls(geometry, t, x, y, p)

    @classmethod
    def from_array(cls, arr, geometry=None) -> "EventStream":
        """Build from an ``(n, 4)`` array with columns ``t, x, y, p``."""
        arr = np.asarray(arr)
        if arr.ndim != 2 or arr.shape[1] != 4:
            raise ValueError(f"expected an (n, 4) array of t, x, y, p; got shape {arr.shape}")
        if geometry is None:
            geometry = infer_geometry(arr[:, 1], arr[:, 2])
        return cls(geometry, arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3])

    def to_array(self) -> np.ndarray:
        return np.column_stack([self.t, self.x, self.y, self.p]).astype(np.int64)

    def __len__(self):
        return len(self.t)

    def __iter__(self):
        for row in zip(self.t.tolist(), self.x.tolist(), self.y.tolist(), self.p.tolist()):
            yield Event(*row)

    def __getitem__(self, index):
        if isinstance(index, (int, np.integer)):
            return Event(int(self.t[index]), int(self.x[index]), int(self.y[index]), int(self.p[index]))
        return self.take(index)

    def take(self, index, geometry=None) -> "EventStream":
        """Subset by boolean mask, index array or slice, keeping field order."""
        return EventStream(
            geometry or self.geometry, self.t[index], self.x[index], self.y[index], self.p[index]
        )

    def with_geometry(self, geometry) -> "EventStream":
        return EventStream(geometry, self.t, self.x, self.y, self.p)

    def __eq__(self, other):
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            self.geometry == other.geometry
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.p, other.p)
        )

    __hash__ = None

    def __repr__(self):
        g = self.geometry
        return f"EventStream({len(self)} events, {g.width}x{g.height})"


class LabeledStream:
    """An :class:`EventStream` with a signal/noise flag per event."""

    __slots__ = ("stream", "labels")

    def __init__(self, stream: EventStream, labels):
        labels = _frozen(labels, LABEL_DTYPE)
        if len(labels) != len(stream):
            raise ValueError(f"{len(labels)} labels for {len(stream)} events")
        if len(labels) and labels.max() > Label.NOISE:
            raise ValueError("labels must be 0 (signal) or 1 (noise)")
        object.__setattr__(self, "stream", stream)
        object.__setattr__(self, "labels", labels)

    def __setattr__(self, name, value):
        raise AttributeError("LabeledStream is immutable")

    @classmethod
    def uniform(cls, stream: EventStream, label: Label) -> "LabeledStream":
        return cls(stream, np.full(len(stream), int(label), dtype=LABEL_DTYPE))

    @property
    def geometry(self) -> SensorGeometry:
        return self.stream.geometry

    @property
    def is_noise(self) -> np.ndarray:
        return self.labels == Label.NOISE

    def take(self, index) -> "LabeledStream":
        return LabeledStream(self.stream.take(index), self.labels[index])

    def __len__(self):
        return len(self.labels)

    def __eq__(self, other):
        if not isinstance(other, LabeledStream):
            return NotImplemented
        return self.stream == other.stream and np.array_equal(self.labels, other.labels)

    __hash__ = None

    def __repr__(self):
        return f"LabeledStream({len(self)} events, {int(self.is_noise.sum())} noise)"


@dataclass(frozen=True)
class WindowSpec:
    t0: int
    duration: int
    T: int = 1

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError(f"window duration must be positive, got {self.duration}")
        if self.T < 1:
            raise ValueError(f"number of time bins must be >= 1, got {self.T}")

    @property
    def t1(self) -> int:
        return self.t0 + self.duration


class ValidationReport(NamedTuple):
    ok: bool
    index: Optional[int] = None
    reason: Optional[str] = None

    def __bool__(self):
        return self.ok


def infer_geometry(x, y) -> SensorGeometry:
    x = np.asarray(x)
    y = np.asarray(y)
    if len(x) == 0:
        return SensorGeometry(1, 1)
    return SensorGeometry(int(x.max()) + 1, int(y.max()) + 1)


def validate(stream: EventStream) -> ValidationReport:
    """Report the first event that breaks ordering, bounds or polarity rules."""
    g = stream.geometry
    checks = (
        (stream.t < 0, "negative timestamp"),
        ((stream.x < 0) | (stream.x >= g.width), "x out of bounds"),
        ((stream.y < 0) | (stream.y >= g.height), "y out of bounds"),
        ((stream.p != 1) & (stream.p != -1), "polarity not in {-1, +1}"),
    )
    first = None
    for bad, reason in checks:
        idx = np.flatnonzero(bad)
        if len(idx) and (first is None or idx[0] < first[0]):
            first = (int(idx[0]), reason)
    unsorted = np.flatnonzero(np.diff(stream.t) < 0)
    if len(unsorted) and (first is None or unsorted[0] + 1 < first[0]):
        first = (int(unsorted[0]) + 1, "timestamps decrease")
    if first is None:
        return ValidationReport(True)
    return ValidationReport(False, *first)


def check_valid(stream: EventStream) -> EventStream:
    report = validate(stream)
    if not report.ok:
        raise ValueError(f"invalid event stream at index {report.index}: {report.reason}")
    return stream


def slice_window(stream, t0, duration):
    """Events with ``t0 <= t < t0 + duration``; works on labeled streams too."""
    if duration <= 0:
        raise ValueError(f"window duration must be positive, got {duration}")
    base = stream.stream if isinstance(stream, LabeledStream) else stream
    lo = np.searchsorted(base.t, t0, side="left")
    hi = np.searchsorted(base.t, t0 + duration, side="left")
    return stream.take(slice(lo, hi))


def extent(stream: EventStream) -> Optional[WindowSpec]:
    """Smallest half-open window covering every event, or None when empty."""
    if len(stream) == 0:
        return None
    return WindowSpec(int(stream.t[0]), int(stream.t[-1] - stream.t[0]) + 1)


def merge(a: LabeledStream, b: LabeledStream) -> LabeledStream:
    """Ordered merge of two labeled streams; equal timestamps put ``a`` first."""
    if a.geometry != b.geometry:
        raise ValueError(f"cannot merge streams with geometries {a.geometry} and {b.geometry}")
    if len(b) == 0:
        return a
    if len(a) == 0:
        return b
    ta, tb = a.stream.t, b.stream.t
    n = len(ta) + len(tb)
    pos_a = np.arange(len(ta)) + np.searchsorted(tb, ta, side="left")
    pos_b = np.arange(len(tb)) + np.searchsorted(ta, tb, side="right")

    def interleave(col_a, col_b):
        out = np.empty(n, dtype=col_a.dtype)
        out[pos_a] = col_a
        out[pos_b] = col_b
        return out

    sa, sb = a.stream, b.stream
    stream = EventStream(
        a.geometry,
        interleave(sa.t, sb.t),
        interleave(sa.x, sb.x),
        interleave(sa.y, sb.y),
        interleave(sa.p, sb.p),
    )
    return LabeledStream(stream, interleave(a.labels, b.labels))


def concatenate(streams, geometry=None) -> EventStream:
    """Join streams end to end without re-sorting."""
    streams = list(streams)
    geometry = geometry or streams[0].geometry
    return EventStream(
        geometry,
        np.concatenate([s.t for s in streams]),
        np.concatenate([s.x for s in streams]),
        np.concatenate([s.y for s in streams]),
        np.concatenate([s.p for s in streams]),
    )
