"""Background-activity denoising filters.

Both filters are single-pass and causal: each event is judged against state
built from strictly earlier events, then folded into that state. They return
a boolean keep-mask aligned with the input so labels can be carried along.
"""
from __future__ import annotations

from typing import NamedTuple

import numba
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_positive, check_stream
from .events import LabeledStream
from .evaluation import confusion

_NEVER = -(1 << 62)


@numba.njit(cache=True, nogil=True)
def _nn_kernel(t, x, y, p, width, height, window, per_polarity):
    n = t.shape[0]
    keep = np.zeros(n, dtype=np.bool_)
    planes = 2 if per_polarity else 1
    # one-pixel border so the 3x3 lookup never needs bounds checks
    last = np.full((planes, height + 2, width + 2), _NEVER, dtype=np.int64)
    for i in range(n):
        c = 0
        if per_polarity and p[i] > 0:
            c = 1
        xi = x[i] + 1
        yi = y[i] + 1
        ti = t[i]
        oldest = ti - window
        plane = last[c]
        if (
            plane[yi - 1, xi - 1] >= oldest
            or plane[yi - 1, xi] >= oldest
            or plane[yi - 1, xi + 1] >= oldest
            or plane[yi, xi - 1] >= oldest
            or plane[yi, xi] >= oldest
            or plane[yi, xi + 1] >= oldest
            or plane[yi + 1, xi - 1] >= oldest
            or plane[yi + 1, xi] >= oldest
            or plane[yi + 1, xi + 1] >= oldest
        ):
            keep[i] = True
        plane[yi, xi] = ti
    return keep


@numba.njit(cache=True, nogil=True)
def _dif_kernel(t, x, y, width, height, filter_length, side, update, eps, warmup, reach, predictive):
    n = t.shape[0]
    keep = np.zeros(n, dtype=np.bool_)
    nrx = (width + side - 1) // side
    nry = (height + side - 1) // side
    last = np.zeros((nry, nrx), dtype=np.float64)
    interval = np.zeros((nry, nrx), dtype=np.float64)
    seen = np.zeros((nry, nrx), dtype=np.int64)
    half = (side - 1) / 2.0
    for i in range(n):
        xi = x[i]
        yi = y[i]
        ti = float(t[i])
        rx = xi // side
        ry = yi // side
        if seen[ry, rx] < warmup:
            keep[i] = True
        else:
            num = 0.0
            den = 0.0
            for ny in range(max(ry - reach, 0), min(ry + reach + 1, nry)):
                cy = ny * side + half - yi
                for nx in range(max(rx - reach, 0), min(rx + reach + 1, nrx)):
                    if seen[ny, nx] < 2:
                        continue
                    cx = nx * side + half - xi
                    w = 1.0 / (np.sqrt(cx * cx + cy * cy) + eps)
                    if predictive:
                        num += w * (last[ny, nx] + interval[ny, nx])
                    else:
                        # a region idle for longer than its interval cannot fire faster than that
                        period = max(interval[ny, nx], ti - last[ny, nx], 1.0)
                        w /= period
                        num += w * last[ny, nx]
                    den += w
            if predictive:
                keep[i] = abs(ti - num / den) <= filter_length
            else:
                keep[i] = ti - num / den <= filter_length
        s = seen[ry, rx]
        if s == 0:
            last[ry, rx] = ti
        elif s == 1:
            interval[ry, rx] = ti - last[ry, rx]
            last[ry, rx] += update * (ti - last[ry, rx])
        else:
            interval[ry, rx] += update * ((ti - last[ry, rx]) - interval[ry, rx])
            last[ry, rx] += update * (ti - last[ry, rx])
        seen[ry, rx] = s + 1
    return keep


def nn_filter(stream, temporal_window=10_000, per_polarity=False) -> np.ndarray:
    """Keep events with a prior event in their 3x3 neighbourhood no older than ``temporal_window`` us.

    The neighbourhood includes the event's own pixel. Polarities share one
    timestamp map unless ``per_polarity`` is set.
    """
    check_positive("temporal_window", temporal_window)
    g = stream.geometry
    return _nn_kernel(stream.t, stream.x, stream.y, stream.p, g.width, g.height,
                      int(temporal_window), bool(per_polarity))


def dif_filter(stream, filter_length=15_000, scale=4, update_factor=0.5, epsilon=0.5,
               warmup_events=2, reach=1, interpolation="frequency") -> np.ndarray:
    """Distance/frequency-weighted timestamp interpolation over square subregions.

    The sensor is tiled with ``scale`` x ``scale`` px subregions. On every event
    its subregion updates a smoothed timestamp and a smoothed inter-event
    interval (exponential smoothing with ``update_factor``). An event is then
    judged against the subregions within ``reach`` of its own that have seen
    at least two events.

    ``interpolation="frequency"`` interpolates their smoothed timestamps with
    weights ``f / (d + epsilon)``, ``d`` being the distance to the subregion
    centre and ``f`` its event frequency (one over the larger of the smoothed
    interval and the time since its last event), and keeps the event if it is
    at most ``filter_length`` us later than the interpolated timestamp.

    ``interpolation="predictive"`` instead interpolates the predicted next
    timestamps ``last + interval`` with weights ``1 / (d + epsilon)`` and keeps
    the event if it lies within ``filter_length`` us of the prediction.

    Events whose subregion has seen fewer than ``warmup_events`` are kept.
    """
    check_positive("filter_length", filter_length)
    if int(scale) != scale or scale < 1:
        raise ValueError(f"scale must be a positive integer, got {scale}")
    if not 0 < update_factor <= 1:
        raise ValueError(f"update_factor must be in (0, 1], got {update_factor}")
    if warmup_events < 2:
        raise ValueError("warmup_events must be >= 2: the interval is undefined before two events")
    if epsilon <= 0 or reach < 0:
        raise ValueError("epsilon must be positive and reach non-negative")
    if interpolation not in ("frequency", "predictive"):
        raise ValueError(f"unknown interpolation {interpolation!r}")
    g = stream.geometry
    return _dif_kernel(stream.t, stream.x, stream.y, g.width, g.height, float(filter_length),
                       int(scale), float(update_factor), float(epsilon), int(warmup_events),
                       int(reach), interpolation == "predictive")


class _EventFilter(TransformerMixin, BaseEstimator):
    """Shared estimator surface: ``predict`` gives the keep-mask, ``transform`` applies it."""

    threshold_param = None

    def fit(self, X=None, y=None):
        self._check_params()
        return self

    def _check_params(self):
        check_positive(self.threshold_param, getattr(self, self.threshold_param))

    def predict(self, X):
        self._check_params()
        return self._mask(check_stream(X))

    def transform(self, X):
        """Kept events; labels survive if ``X`` is labeled."""
        keep = self.predict(X)
        if isinstance(X, LabeledStream):
            return X.take(keep)
        return check_stream(X, validate=False).take(keep)

    def score(self, X, y=None):
        """Youden index ``TPR - FPR`` on a labeled stream."""
        report = confusion(X, self.predict(X))
        return report.tpr - report.fpr


class NNFilter(_EventFilter):
    threshold_param = "temporal_window"

    def __init__(self, temporal_window=10_000, per_polarity=False):
        self.temporal_window = temporal_window
        self.per_polarity = per_polarity

    def _mask(self, stream):
        return nn_filter(stream, self.temporal_window, self.per_polarity)


class DIFFilter(_EventFilter):
    threshold_param = "filter_length"

    def __init__(self, filter_length=15_000, scale=4, update_factor=0.5, epsilon=0.5,
                 warmup_events=2, reach=1, interpolation="frequency"):
        self.filter_length = filter_length
        self.scale = scale
        self.update_factor = update_factor
        self.epsilon = epsilon
        self.warmup_events = warmup_events
        self.reach = reach
        self.interpolation = interpolation

    def _mask(self, stream):
        return dif_filter(stream, self.filter_length, self.scale, self.update_factor,
                          self.epsilon, self.warmup_events, self.reach, self.interpolation)


FILTERS = {"nn": NNFilter, "dif": DIFFilter}


def make_filter(kind, **params) -> _EventFilter:
    try:
        cls = FILTERS[kind]
    except KeyError:
        raise ValueError(f"unknown filter {kind!r}; expected one of {sorted(FILTERS)}") from None
    return cls(**params)


class SweepPoint(NamedTuple):
    threshold: float
    tpr: float
    fpr: float


def sweep(kind, thresholds, labeled: LabeledStream, **params):
    """TPR/FPR of one filter at each threshold (NN window or DIF filter length)."""
    thresholds = list(thresholds)
    if not thresholds:
        raise ValueError("threshold list is empty")
    if any(th <= 0 for th in thresholds) or any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("thresholds must be positive and strictly increasing")
    est = make_filter(kind, **params)
    out = []
    for th in thresholds:
        est.set_params(**{est.threshold_param: th})
        report = confusion(labeled, est.predict(labeled))
        out.append(SweepPoint(th, report.tpr, report.fpr))
    return out
