"""Dense and graph event representations, plus geometric stream augmentations.

Dense tensors are float32, channel-major, with spatial axes ordered
``(H, W)``. Polarity channel 0 holds negative events and channel 1 positive.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator, TransformerMixin

from ._seeding import derive_seed
from ._validation import check_stream
from .events import EventStream, LabeledStream, SensorGeometry, WindowSpec, slice_window

DEFAULT_TIME_BINS = 10
GRAPH_RADIUS = 0.02
GRAPH_MAX_NEIGHBORS = 16


def _binned_counts(stream, window: WindowSpec, T):
    g = stream.geometry
    s = slice_window(stream, window.t0, window.duration)
    bins = ((s.t - window.t0) * T) // window.duration
    pol = (s.p > 0).astype(np.int64)
    flat = ((bins * 2 + pol) * g.height + s.y) * g.width + s.x
    counts = np.bincount(flat, minlength=T * 2 * g.pixel_count)
    return counts.astype(np.float32).reshape(T, 2, g.height, g.width)


def event_count_image(stream, window: WindowSpec) -> np.ndarray:
    """Per-polarity event counts, shape ``(2, H, W)``."""
    return _binned_counts(stream, window, 1)[0]


def event_spike_tensor(stream, window: WindowSpec) -> np.ndarray:
    """Counts per time bin and polarity, shape ``(T, 2, H, W)``."""
    return _binned_counts(stream, window, window.T)


def voxel_grid(stream, window: WindowSpec) -> np.ndarray:
    """Same counts as :func:`event_spike_tensor`, laid out ``(2T, H, W)`` as [bin0 neg, bin0 pos, bin1 neg, ...]."""
    est = event_spike_tensor(stream, window)
    return est.reshape(2 * window.T, *est.shape[2:])


@dataclass(frozen=True, eq=False)
class VoxelGraph:
    positions: np.ndarray  # (n, 3) mean normalised x, y, t
    avg_polarity: np.ndarray  # (n,)
    counts: np.ndarray  # (n,)
    edges: np.ndarray  # (m, 2), src < dst

    @property
    def n_nodes(self) -> int:
        return len(self.counts)

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n_nodes)

    def edge_lengths(self) -> np.ndarray:
        d = self.positions[self.edges[:, 0]] - self.positions[self.edges[:, 1]]
        return np.sqrt((d * d).sum(axis=1))

    def __eq__(self, other):
        if not isinstance(other, VoxelGraph):
            return NotImplemented
        return all(
            np.array_equal(a, b)
            for a, b in zip(
                (self.positions, self.avg_polarity, self.counts, self.edges),
                (other.positions, other.avg_polarity, other.counts, other.edges),
            )
        )

    __hash__ = None


def default_voxels(geometry: SensorGeometry, T=DEFAULT_TIME_BINS):
    return max(geometry.width // 8, 1), max(geometry.height // 8, 1), T


def _cap_neighbors(i, j, dist, n, k):
    """Keep pair (i, j) only if each endpoint ranks the other among its ``k`` nearest."""
    src = np.concatenate([i, j])
    dst = np.concatenate([j, i])
    d = np.concatenate([dist, dist])
    order = np.lexsort((dst, d, src))
    src, dst = src[order], dst[order]
    starts = np.searchsorted(src, np.arange(n))
    rank = np.arange(len(src)) - starts[src]
    ok = rank < k
    kept = src[ok] * n + dst[ok]
    return np.isin(i * n + j, kept) & np.isin(j * n + i, kept)


def voxel_graph(stream, window: WindowSpec, voxels=None, radius=GRAPH_RADIUS,
                max_neighbors=GRAPH_MAX_NEIGHBORS) -> VoxelGraph:
    """Graph of voxel-averaged events in normalised ``[0, 1]^3`` space-time.

    Each non-empty voxel becomes a node carrying the mean normalised position,
    mean polarity and event count of its events. Nodes closer than ``radius``
    are joined; a node with more than ``max_neighbors`` candidates keeps the
    nearest ones (ties to the lower id) and an edge survives only if both
    endpoints keep it. Node ids follow voxel order (t, then y, then x).
    """
    g = stream.geometry
    vx, vy, vt = voxels or default_voxels(g, window.T)
    if min(vx, vy, vt) < 1:
        raise ValueError(f"voxel counts must be >= 1, got {(vx, vy, vt)}")
    s = slice_window(stream, window.t0, window.duration)
    if len(s) == 0:
        return VoxelGraph(np.zeros((0, 3)), np.zeros(0), np.zeros(0, dtype=np.int64), np.zeros((0, 2), dtype=np.int64))

    pos = np.column_stack([
        s.x / (g.width - 1) if g.width > 1 else np.zeros(len(s)),
        s.y / (g.height - 1) if g.height > 1 else np.zeros(len(s)),
        (s.t - window.t0) / window.duration,
    ])
    sizes = np.array([vx, vy, vt])
    cell = np.minimum((pos * sizes).astype(np.int64), sizes - 1)
    key = (cell[:, 2] * vy + cell[:, 1]) * vx + cell[:, 0]
    uniq, inverse, counts = np.unique(key, return_inverse=True, return_counts=True)
    n = len(uniq)
    positions = np.column_stack([np.bincount(inverse, weights=pos[:, a], minlength=n) for a in range(3)])
    positions /= counts[:, None]
    np.clip(positions, 0.0, 1.0, out=positions)
    avg_p = np.bincount(inverse, weights=s.p.astype(np.float64), minlength=n) / counts

    pairs = cKDTree(positions).query_pairs(radius * (1 + 1e-9), output_type="ndarray")
    if len(pairs):
        i, j = pairs[:, 0], pairs[:, 1]
        diff = positions[i] - positions[j]
        dist = np.sqrt((diff * diff).sum(axis=1))
        near = dist <= radius
        i, j, dist = i[near], j[near], dist[near]
        keep = _cap_neighbors(i, j, dist, n, max_neighbors)
        edges = np.column_stack([i[keep], j[keep]]).astype(np.int64)
        edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
    else:
        edges = np.zeros((0, 2), dtype=np.int64)
    return VoxelGraph(positions, avg_p, counts.astype(np.int64), edges)


class _Representation(TransformerMixin, BaseEstimator):
    def fit(self, X=None, y=None):
        return self

    def _window(self, stream):
        t0 = self.t0
        if t0 is None:
            t0 = int(stream.t[0]) if len(stream) else 0
        return WindowSpec(t0, self.duration, self.time_bins)


class EventCountImage(_Representation):
    def __init__(self, t0=None, duration=50_000):
        self.t0 = t0
        self.duration = duration
        self.time_bins = 1

    def transform(self, X):
        stream = check_stream(X)
        return event_count_image(stream, self._window(stream))


class VoxelGrid(_Representation):
    def __init__(self, t0=None, duration=50_000, time_bins=DEFAULT_TIME_BINS):
        self.t0 = t0
        self.duration = duration
        self.time_bins = time_bins

    def transform(self, X):
        stream = check_stream(X)
        return voxel_grid(stream, self._window(stream))


class EventSpikeTensor(VoxelGrid):
    def transform(self, X):
        stream = check_stream(X)
        return event_spike_tensor(stream, self._window(stream))


class VoxelGraphBuilder(_Representation):
    def __init__(self, t0=None, duration=50_000, time_bins=DEFAULT_TIME_BINS, voxels=None,
                 radius=GRAPH_RADIUS, max_neighbors=GRAPH_MAX_NEIGHBORS):
        self.t0 = t0
        self.duration = duration
        self.time_bins = time_bins
        self.voxels = voxels
        self.radius = radius
        self.max_neighbors = max_neighbors

    def transform(self, X):
        stream = check_stream(X)
        return voxel_graph(stream, self._window(stream), self.voxels, self.radius, self.max_neighbors)


REPRESENTATIONS = {
    "eci": EventCountImage,
    "voxel-grid": VoxelGrid,
    "spike-tensor": EventSpikeTensor,
    "voxel-graph": VoxelGraphBuilder,
}


# -- geometric augmentations ----------------------------------------------

def _labels_follow(src, out_stream, index):
    if isinstance(src, LabeledStream):
        return LabeledStream(out_stream, src.labels[index])
    return out_stream


def _base(stream):
    return stream.stream if isinstance(stream, LabeledStream) else stream


def hflip(stream):
    s = _base(stream)
    out = EventStream(s.geometry, s.t, s.geometry.width - 1 - s.x, s.y, s.p)
    return _labels_follow(stream, out, slice(None))


def translate(stream, dx, dy):
    """Shift by whole pixels; events pushed off the sensor are dropped."""
    s = _base(stream)
    x = s.x.astype(np.int64) + int(dx)
    y = s.y.astype(np.int64) + int(dy)
    inside = (x >= 0) & (x < s.geometry.width) & (y >= 0) & (y < s.geometry.height)
    out = EventStream(s.geometry, s.t[inside], x[inside], y[inside], s.p[inside])
    return _labels_follow(stream, out, inside)


def crop(stream, x0, y0, w, h):
    """Keep events in ``[x0, x0+w) x [y0, y0+h)`` and rebase to a ``w x h`` sensor."""
    s = _base(stream)
    g = s.geometry
    if w < 1 or h < 1 or x0 < 0 or y0 < 0 or x0 + w > g.width or y0 + h > g.height:
        raise ValueError(f"crop ({x0}, {y0}, {w}, {h}) does not fit a {g.width}x{g.height} sensor")
    inside = (s.x >= x0) & (s.x < x0 + w) & (s.y >= y0) & (s.y < y0 + h)
    out = EventStream(SensorGeometry(w, h), s.t[inside], s.x[inside] - x0, s.y[inside] - y0, s.p[inside])
    return _labels_follow(stream, out, inside)


@dataclass(frozen=True)
class TransformPolicy:
    flip_p: float = 0.5
    max_translate: float = 0.1  # fraction of each dimension
    crop_scale: tuple = (0.8, 1.0)

    def __post_init__(self):
        lo, hi = self.crop_scale
        if not (0 <= self.flip_p <= 1 and 0 <= self.max_translate < 1 and 0 < lo <= hi <= 1):
            raise ValueError(f"invalid transform policy {self}")


@dataclass(frozen=True)
class ComposedTransform:
    """A realised draw of the random policy: flip, then translate, then crop."""

    flip: bool
    dx: int
    dy: int
    crop_box: tuple  # (x0, y0, w, h)

    def __call__(self, stream):
        out = hflip(stream) if self.flip else stream
        if self.dx or self.dy:
            out = translate(out, self.dx, self.dy)
        g = _base(out).geometry
        if self.crop_box != (0, 0, g.width, g.height):
            out = crop(out, *self.crop_box)
        return out


def random_transform_policy(base_seed, sample_id, geometry, policy=TransformPolicy()) -> ComposedTransform:
    rng = np.random.default_rng(derive_seed(base_seed, sample_id))
    w, h = geometry.width, geometry.height
    flip = bool(rng.random() < policy.flip_p)
    mx, my = int(policy.max_translate * w), int(policy.max_translate * h)
    dx = int(rng.integers(-mx, mx + 1))
    dy = int(rng.integers(-my, my + 1))
    scale = rng.uniform(*policy.crop_scale)
    cw = min(max(int(round(scale * w)), 1), w)
    ch = min(max(int(round(scale * h)), 1), h)
    x0 = int(rng.integers(0, w - cw + 1))
    y0 = int(rng.integers(0, h - ch + 1))
    return ComposedTransform(flip, dx, dy, (x0, y0, cw, ch))


class RandomEventTransform(TransformerMixin, BaseEstimator):
    """Seeded random flip/translate/crop; the draw depends only on ``(seed, sample_id)``."""

    def __init__(self, flip_p=0.5, max_translate=0.1, crop_scale=(0.8, 1.0), seed=0):
        self.flip_p = flip_p
        self.max_translate = max_translate
        self.crop_scale = crop_scale
        self.seed = seed

    def fit(self, X=None, y=None):
        self._policy()
        return self

    def _policy(self):
        return TransformPolicy(self.flip_p, self.max_translate, tuple(self.crop_scale))

    def draw(self, geometry, sample_id=0) -> ComposedTransform:
        return random_transform_policy(self.seed, sample_id, geometry, self._policy())

    def transform(self, X, sample_id=0):
        if not isinstance(X, LabeledStream):
            X = check_stream(X)
        return self.draw(_base(X).geometry, sample_id)(X)
