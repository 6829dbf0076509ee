"""Filter scoring and throughput measurement.

Rates use the signal-retention convention: a *positive* is an event the
filter keeps. TPR is the fraction of signal events kept and FPR the fraction
of noise events kept, so a gentle filter has both close to 1.
"""
from __future__ import annotations

import os
import statistics
import time
from dataclasses import asdict, dataclass

import numpy as np

from .events import EventStream, LabeledStream


def _rate(num, den):
    return num / den if den else 0.0


@dataclass(frozen=True)
class ConfusionReport:
    TP: int
    FP: int
    TN: int
    FN: int

    @property
    def tpr(self) -> float:
        return _rate(self.TP, self.TP + self.FN)

    @property
    def fpr(self) -> float:
        return _rate(self.FP, self.FP + self.TN)

    def to_dict(self):
        return {**asdict(self), "TPR": self.tpr, "FPR": self.fpr}


def confusion(labeled: LabeledStream, keep) -> ConfusionReport:
    keep = np.asarray(keep, dtype=bool)
    if len(keep) != len(labeled):
        raise ValueError(f"mask has {len(keep)} entries for {len(labeled)} events")
    noise = labeled.is_noise
    n_noise = int(noise.sum())
    fp = int(np.count_nonzero(keep & noise))
    tp = int(np.count_nonzero(keep)) - fp
    fn = len(keep) - n_noise - tp
    return ConfusionReport(TP=tp, FP=fp, TN=n_noise - fp, FN=fn)


def stream_stats(stream) -> dict:
    """Count, duration (us), mean rate in Hz/px, polarity balance and busiest-pixel count."""
    if isinstance(stream, LabeledStream):
        stream = stream.stream
    n = len(stream)
    if n == 0:
        return {"count": 0, "duration": 0, "mean_rate": 0.0, "polarity_balance": 0.0, "max_pixel_count": 0}
    g = stream.geometry
    duration = int(stream.t[-1] - stream.t[0]) + 1
    per_pixel = np.bincount(stream.y.astype(np.int64) * g.width + stream.x, minlength=g.pixel_count)
    return {
        "count": n,
        "duration": duration,
        "mean_rate": n / (g.pixel_count * duration / 1e6),
        "polarity_balance": float(stream.p.astype(np.int64).sum()) / n,
        "max_pixel_count": int(per_pixel.max()),
    }


@dataclass(frozen=True)
class ThroughputReport:
    filter: str
    events_total: int
    wall_seconds: tuple
    events_per_second: tuple
    input: str = ""

    @property
    def min(self) -> float:
        return min(self.events_per_second)

    @property
    def median(self) -> float:
        return statistics.median(self.events_per_second)

    @property
    def max(self) -> float:
        return max(self.events_per_second)

    def to_dict(self):
        return {
            "filter": self.filter,
            "events_total": self.events_total,
            "wall_seconds": list(self.wall_seconds),
            "events_per_second": {
                "runs": list(self.events_per_second),
                "min": self.min,
                "median": self.median,
                "max": self.max,
            },
            "input": self.input,
        }


def _pin_single_core():
    if hasattr(os, "sched_getaffinity"):
        cores = sorted(os.sched_getaffinity(0))
        os.sched_setaffinity(0, {cores[0]})
        return cores
    return None


def throughput_bench(kind, stream, params=None, repeats=3, warmup=1, pin=True, input_desc=""):
    """Time a filter end to end ``warmup + repeats`` times on one core."""
    from .filters import make_filter

    if isinstance(stream, LabeledStream):
        stream = stream.stream
    if len(stream) == 0:
        raise ValueError("cannot benchmark on an empty stream")
    if repeats < 1 or warmup < 0:
        raise ValueError("repeats must be >= 1 and warmup >= 0")
    est = make_filter(kind, **(params or {}))
    previous = _pin_single_core() if pin else None
    try:
        for _ in range(warmup):
            est.predict(stream)
        walls = []
        for _ in range(repeats):
            start = time.perf_counter()
            est.predict(stream)
            walls.append(time.perf_counter() - start)
    finally:
        if previous is not None:
            os.sched_setaffinity(0, previous)
    n = len(stream)
    return ThroughputReport(kind, n, tuple(walls), tuple(n / w for w in walls), input_desc)


def benchmark_stream(n_events, lam=1.0, geometry=(240, 180), seed=0) -> EventStream:
    """First ``n_events`` of a moving bar (2000 px/s, 20 px wide) plus ``lam`` Hz/px shot noise."""
    from .events import SensorGeometry, WindowSpec
    from .noise import NoiseSpec, generate_signal_bar, inject_noise

    g = SensorGeometry(*geometry)
    speed, bar_width = 2000.0, 20
    # both edges fire on every row most of the time; overshoot then truncate
    rate = 2 * speed * g.height * g.width / (g.width + bar_width) + lam * g.pixel_count
    duration = int(n_events / rate * 1e6 * 1.05) + 1000
    bar = generate_signal_bar(g, bar_width, speed, duration)
    mixed = inject_noise(bar, NoiseSpec(lam, seed=seed), WindowSpec(0, duration))
    if len(mixed) < n_events:
        raise RuntimeError("benchmark stream came out short")
    return mixed.stream.take(slice(0, n_events))
