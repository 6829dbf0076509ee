"""Input coercion shared by the estimator classes."""
import numpy as np

from .events import EventStream, LabeledStream, check_valid


def check_stream(X, geometry=None, validate=True) -> EventStream:
    """Coerce ``X`` to a valid :class:`EventStream`.

    Accepts an EventStream, a LabeledStream (labels are dropped) or an
    ``(n, 4)`` array with columns ``t, x, y, p``.
    """
    if isinstance(X, LabeledStream):
        X = X.stream
    elif not isinstance(X, EventStream):
        X = EventStream.from_array(np.asarray(X), geometry)
    if validate:
        check_valid(X)
    return X


def check_labeled(X) -> LabeledStream:
    if not isinstance(X, LabeledStream):
        raise TypeError(f"expected a LabeledStream, got {type(X).__name__}")
    check_valid(X.stream)
    return X


def check_positive(name, value):
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")
    return value
