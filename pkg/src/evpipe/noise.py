"""Shot-noise simulation and noise-injection augmentation.

Shot noise is modelled as a Poisson process shared by all pixels, simulated
with Bernoulli trials: the sensor-wide time step is ``1 / (lam * N * D)``
seconds, an event fires in a step with probability ``N * P = 1 / D`` (``P``
being the per-pixel probability ``1 / (N * D)``), and a firing step gets a
uniformly drawn pixel and polarity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._seeding import derive_seed, uniform_index
from ._validation import check_stream
from .events import (
    EventStream,
    Label,
    LabeledStream,
    SensorGeometry,
    WindowSpec,
    check_valid,
    extent,
    merge,
    slice_window,
)

DEFAULT_SUBDIV = 10
MAX_PIXEL_PROBABILITY = 0.01
DEFAULT_LEVELS = (0.0, 0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0)

_CHUNK = 1 << 22


def compute_time_step(lam, n_pixels, subdiv=DEFAULT_SUBDIV):
    """Bernoulli step length in seconds, ``1 / (lam * n_pixels * subdiv)``."""
    if lam <= 0:
        raise ValueError(f"noise intensity must be positive, got {lam}")
    if n_pixels < 1 or subdiv < 1:
        raise ValueError("pixel count and subdivision must be >= 1")
    return 1.0 / (lam * n_pixels * subdiv)


def pixel_probability(n_pixels, subdiv=DEFAULT_SUBDIV):
    """Per-pixel event probability in one step, ``lam * dt = 1 / (N * D)``."""
    if n_pixels < 1 or subdiv < 1:
        raise ValueError("pixel count and subdivision must be >= 1")
    return 1.0 / (n_pixels * subdiv)


@dataclass(frozen=True)
class NoiseSpec:
    lam: float
    subdiv: int = DEFAULT_SUBDIV
    seed: int = 0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"noise intensity must be >= 0, got {self.lam}")
        if int(self.subdiv) != self.subdiv or self.subdiv < 1:
            raise ValueError(f"subdivision must be an integer >= 1, got {self.subdiv}")

    def check(self, geometry: SensorGeometry) -> "NoiseSpec":
        """Reject parameter sets where the Bernoulli chain is a poor Poisson approximation."""
        if self.lam > 0:
            p = pixel_probability(geometry.pixel_count, self.subdiv)
            if p > MAX_PIXEL_PROBABILITY:
                raise ValueError(
                    f"per-step pixel probability 1/(N*D) = {p:.4g} exceeds {MAX_PIXEL_PROBABILITY}; "
                    "increase the subdivision factor"
                )
        return self


@dataclass(frozen=True)
class LevelSet:
    levels: tuple = field(default=DEFAULT_LEVELS)

    def __post_init__(self):
        levels = tuple(float(v) for v in self.levels)
        if not levels:
            raise ValueError("level set is empty")
        if any(v < 0 for v in levels):
            raise ValueError("noise levels must be >= 0")
        if len(set(levels)) != len(levels):
            raise ValueError("noise levels must be distinct")
        object.__setattr__(self, "levels", levels)

    def __len__(self):
        return len(self.levels)


def generate_noise(geometry, lam, duration, subdiv=DEFAULT_SUBDIV, seed=0, t0=0) -> EventStream:
    """Shot noise over ``[t0, t0 + duration)`` microseconds."""
    if not isinstance(geometry, SensorGeometry):
        geometry = SensorGeometry(*geometry)
    if duration <= 0:
        raise ValueError(f"duration must be positive, got {duration}")
    NoiseSpec(lam, subdiv, seed).check(geometry)
    if lam == 0:
        return EventStream.empty(geometry)

    n = geometry.pixel_count
    rate = lam * n * subdiv  # steps per second
    steps = math.floor(duration * rate / 1e6)
    us_per_step = 1e6 / rate
    fire = 1.0 / subdiv

    trial_seq, coord_seq = np.random.SeedSequence(seed).spawn(2)
    trials = np.random.Generator(np.random.PCG64(trial_seq))
    hits = []
    for start in range(0, steps, _CHUNK):
        size = min(_CHUNK, steps - start)
        hits.append(np.flatnonzero(trials.random(size) < fire) + start)
    k = np.concatenate(hits) if hits else np.empty(0, dtype=np.int64)

    coords = np.random.Generator(np.random.PCG64(coord_seq))
    pix = coords.integers(0, n, size=len(k))
    pol = coords.integers(0, 2, size=len(k), dtype=np.int8) * 2 - 1
    t = np.floor(k * us_per_step).astype(np.int64) + t0
    return EventStream(geometry, t, pix % geometry.width, pix // geometry.width, pol)


def inject_noise(signal: EventStream, spec: NoiseSpec, window=None) -> LabeledStream:
    """Merge generated noise into ``signal`` over ``window`` (default: the signal's extent)."""
    check_valid(signal)
    spec.check(signal.geometry)
    labeled = LabeledStream.uniform(signal, Label.SIGNAL)
    window = window or extent(signal)
    if spec.lam == 0 or window is None:
        return labeled
    noise = generate_noise(signal.geometry, spec.lam, window.duration, spec.subdiv, spec.seed, window.t0)
    return merge(labeled, LabeledStream.uniform(noise, Label.NOISE))


def mix_recorded_noise(signal: EventStream, recording: EventStream, window=None, offset=0) -> LabeledStream:
    """Merge a slice of a real noise recording into ``signal``.

    The slice starts ``offset`` microseconds into the recording, is as long as
    the window, is cropped to the signal sensor and is shifted to start at the
    window start.
    """
    check_valid(signal)
    if not recording.geometry.contains(signal.geometry):
        raise ValueError(f"recording geometry {recording.geometry} is smaller than {signal.geometry}")
    labeled = LabeledStream.uniform(signal, Label.SIGNAL)
    window = window or extent(signal)
    if window is None:
        return labeled
    span = int(recording.t[-1] - recording.t[0]) + 1 if len(recording) else 0
    if span - offset < window.duration:
        raise ValueError(
            f"recording covers {span - offset} us after the offset, window needs {window.duration} us"
        )
    start = int(recording.t[0]) + offset
    part = slice_window(recording, start, window.duration)
    g = signal.geometry
    part = part.take((part.x < g.width) & (part.y < g.height), geometry=g)
    shifted = EventStream(g, part.t - start + window.t0, part.x, part.y, part.p)
    return merge(labeled, LabeledStream.uniform(shifted, Label.NOISE))


def draw_noise_level(levels, base_seed, sample_id) -> float:
    """Uniform draw from ``levels``, fixed by ``(base_seed, sample_id)``."""
    if not isinstance(levels, LevelSet):
        levels = LevelSet(tuple(levels))
    return levels.levels[uniform_index(derive_seed(base_seed, sample_id), len(levels))]


def generate_signal_bar(geometry, bar_width, speed, duration, events_per_crossing=None, t0=0) -> EventStream:
    """A vertical bar sweeping left to right, wrapping around.

    Every ``1e6 / speed`` us the bar advances one column; the column entered by
    the leading edge fires ``+1`` events and the column left by the trailing edge
    fires ``-1`` events, on ``events_per_crossing`` evenly spaced rows.
    """
    if not isinstance(geometry, SensorGeometry):
        geometry = SensorGeometry(*geometry)
    w, h = geometry.width, geometry.height
    if speed <= 0:
        raise ValueError(f"bar speed must be positive, got {speed}")
    if bar_width < 1 or bar_width > w:
        raise ValueError(f"bar width {bar_width} does not fit a sensor {w} px wide")
    epc = h if events_per_crossing is None else int(events_per_crossing)
    if not 1 <= epc <= h:
        raise ValueError(f"events per crossing must be in [1, {h}], got {epc}")
    if duration <= 0:
        return EventStream.empty(geometry)

    k = np.arange(int(math.ceil(duration * speed / 1e6)) + 1, dtype=np.int64)
    tk = np.floor(k * 1e6 / speed).astype(np.int64)
    k, tk = k[tk < duration], tk[tk < duration]
    lead = k % (w + bar_width)
    trail = lead - bar_width
    rows = (np.arange(epc, dtype=np.int64) * h) // epc

    # per crossing: epc leading events (if on sensor) then epc trailing events
    cols = np.stack([lead, trail], axis=1)
    pols = np.array([1, -1], dtype=np.int8)
    valid = (cols >= 0) & (cols < w)
    kk, edge = np.nonzero(valid)
    n = len(kk)
    t = np.repeat(tk[kk], epc) + t0
    x = np.repeat(cols[kk, edge], epc)
    y = np.tile(rows, n)
    p = np.repeat(pols[edge], epc)
    return EventStream(geometry, t, x, y, p)


def synthetic_scene(geometry=(64, 64), duration=1_000_000, lam=1.0, subdiv=DEFAULT_SUBDIV, seed=0,
                    bar_width=8, speed=500.0, events_per_crossing=None) -> LabeledStream:
    """Moving bar plus injected shot noise, the scene used for filter scoring."""
    bar = generate_signal_bar(geometry, bar_width, speed, duration, events_per_crossing)
    return inject_noise(bar, NoiseSpec(lam, subdiv, seed), WindowSpec(0, duration))


class NoiseInjector(TransformerMixin, BaseEstimator):
    """Inject shot noise of a fixed intensity into event streams.

    ``transform`` returns a :class:`LabeledStream`. When ``levels`` is given
    the intensity is instead drawn per sample from that set, with the draw
    and the noise seed fixed by ``(seed, sample_id)``.
    """

    def __init__(self, lam=1.0, subdiv=DEFAULT_SUBDIV, seed=0, levels=None):
        self.lam = lam
        self.subdiv = subdiv
        self.seed = seed
        self.levels = levels

    def fit(self, X=None, y=None):
        NoiseSpec(self.lam, self.subdiv, self.seed)
        if self.levels is not None:
            LevelSet(tuple(self.levels))
        return self

    def level_for(self, sample_id=0):
        if self.levels is None:
            return self.lam
        return draw_noise_level(self.levels, self.seed, sample_id)

    def transform(self, X, sample_id=0, window=None):
        stream = check_stream(X)
        lam = self.level_for(sample_id)
        seed = self.seed if self.levels is None else derive_seed(self.seed, sample_id)
        return inject_noise(stream, NoiseSpec(lam, self.subdiv, seed), window)
