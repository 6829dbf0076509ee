import numpy as np
import pytest

from evpipe import ConfusionReport, EventStream, LabeledStream, confusion, stream_stats, throughput_bench
from evpipe.evaluation import benchmark_stream


def _labeled():
    s = EventStream((4, 4), [0, 1, 2, 3, 4], [0] * 5, [0] * 5, [1, -1, 1, 1, -1])
    return LabeledStream(s, [0, 0, 1, 1, 1])


def test_confusion_counts():
    r = confusion(_labeled(), [True, False, True, False, False])
    assert (r.TP, r.FN, r.FP, r.TN) == (1, 1, 1, 2)
    assert r.tpr == 0.5 and r.fpr == pytest.approx(1 / 3)
    assert r.to_dict()["TPR"] == 0.5


def test_confusion_degenerate_rates():
    assert ConfusionReport(0, 0, 0, 0).tpr == 0.0
    assert ConfusionReport(0, 0, 0, 0).fpr == 0.0
    with pytest.raises(ValueError):
        confusion(_labeled(), [True])


def test_keep_all_and_keep_none():
    ls = _labeled()
    keep_all = confusion(ls, np.ones(5, bool))
    none = confusion(ls, np.zeros(5, bool))
    assert (keep_all.tpr, keep_all.fpr) == (1.0, 1.0)
    assert (none.tpr, none.fpr) == (0.0, 0.0)


def test_stream_stats():
    st = stream_stats(_labeled())
    assert st["count"] == 5 and st["duration"] == 5
    assert st["max_pixel_count"] == 5
    assert st["polarity_balance"] == pytest.approx(0.2)
    assert stream_stats(EventStream.empty((2, 2)))["count"] == 0


def test_throughput_report_shape():
    s = benchmark_stream(20_000)
    assert len(s) == 20_000
    r = throughput_bench("nn", s, repeats=2, warmup=1, input_desc="bar")
    d = r.to_dict()
    assert d["events_total"] == 20_000 and len(d["wall_seconds"]) == 2
    assert d["events_per_second"]["min"] <= d["events_per_second"]["median"] <= d["events_per_second"]["max"]
    assert d["input"] == "bar"
    with pytest.raises(ValueError):
        throughput_bench("nn", EventStream.empty((2, 2)))
