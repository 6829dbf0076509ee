import numpy as np
import pytest

from evpipe import DIFFilter, EventStream, LabeledStream, NNFilter, dif_filter, nn_filter, sweep
from evpipe.filters import make_filter
from evpipe.noise import synthetic_scene

from oracles import dif_brute, nn_brute, random_stream


def test_nn_hand_cases():
    s = EventStream((5, 5), [0, 50, 200, 210, 5000], [2, 3, 0, 2, 2], [2, 3, 0, 2, 2], [1, -1, 1, 1, 1])
    assert nn_filter(s, 100).tolist() == [False, True, False, False, False]
    assert nn_filter(s, 200).tolist() == [False, True, False, True, False]


def test_nn_own_pixel_counts():
    s = EventStream((3, 3), [0, 10], [1, 1], [1, 1], [1, 1])
    assert nn_filter(s, 10).tolist() == [False, True]


def test_nn_per_polarity():
    s = EventStream((3, 3), [0, 10], [1, 1], [1, 1], [1, -1])
    assert nn_filter(s, 100).tolist() == [False, True]
    assert nn_filter(s, 100, per_polarity=True).tolist() == [False, False]
    rng = np.random.default_rng(4)
    for _ in range(10):
        r = random_stream(rng, max_n=400, geometry=(10, 10), t_max=50_000)
        assert np.array_equal(nn_filter(r, 3000, True), nn_brute(r, 3000, True))


def test_nn_empty_and_bad_window():
    assert nn_filter(EventStream.empty((4, 4)), 10).shape == (0,)
    with pytest.raises(ValueError):
        nn_filter(EventStream.empty((4, 4)), 0)


@pytest.mark.parametrize("predictive", [False, True])
def test_dif_matches_reference(predictive):
    rng = np.random.default_rng(5 + predictive)
    for _ in range(20):
        s = random_stream(rng, max_n=800, geometry=(20, 14), t_max=200_000)
        for length in (500, 5_000, 30_000):
            mode = "predictive" if predictive else "frequency"
            got = dif_filter(s, length, scale=4, interpolation=mode)
            assert np.array_equal(got, dif_brute(s, length, 4, predictive=predictive))


def test_dif_periodic_region_hand_simulation():
    # one pixel firing every 1000 us with update 0.5: the gap to the smoothed
    # timestamp goes 1500, 1750, 1875, ... towards 2000
    s = EventStream((4, 4), np.arange(0, 12_000, 1000), [1] * 12, [1] * 12, [1] * 12)
    assert dif_filter(s, 2000, scale=4).all()
    assert dif_filter(s, 1800, scale=4).tolist() == [True] * 4 + [False] * 8
    # the prediction last + interval starts 500 us early and converges to the true next event
    pred = dif_filter(s, 10, scale=4, interpolation="predictive")
    assert pred[:2].all() and not pred[2] and pred[-1]


def test_dif_warmup_keeps_first_events():
    s = EventStream((8, 8), [0, 10], [0, 7], [0, 7], [1, 1])
    assert dif_filter(s, 1).tolist() == [True, True]


def test_dif_parameter_checks():
    s = EventStream.empty((4, 4))
    for kwargs in ({"scale": 0}, {"update_factor": 0}, {"warmup_events": 1}, {"interpolation": "x"}):
        with pytest.raises(ValueError):
            dif_filter(s, 10, **kwargs)


@pytest.mark.parametrize("kind", ["nn", "dif"])
def test_keep_sets_grow_with_threshold(kind):
    rng = np.random.default_rng(8)
    fn = nn_filter if kind == "nn" else dif_filter
    for _ in range(10):
        s = random_stream(rng, max_n=1000, geometry=(24, 24), t_max=300_000)
        masks = [fn(s, th) for th in (100, 1_000, 10_000, 100_000)]
        for a, b in zip(masks, masks[1:]):
            assert not np.any(a & ~b)


def test_estimators():
    scene = synthetic_scene(geometry=(32, 32), duration=300_000, lam=2.0, seed=4)
    nn = make_filter("nn", temporal_window=5000).fit()
    assert isinstance(nn, NNFilter) and nn.get_params() == {"temporal_window": 5000, "per_polarity": False}
    out = nn.transform(scene)
    assert isinstance(out, LabeledStream)
    assert len(out) == int(nn.predict(scene).sum())
    assert len(nn.transform(scene.stream)) == len(out)
    assert -1 <= nn.score(scene) <= 1
    dif = DIFFilter().set_params(filter_length=20_000)
    assert dif.filter_length == 20_000
    assert 0 < len(dif.transform(scene)) <= len(scene)
    with pytest.raises(ValueError):
        make_filter("median")
    with pytest.raises(ValueError):
        NNFilter(temporal_window=-5).fit()


def test_sweep():
    scene = synthetic_scene(geometry=(32, 32), duration=300_000, lam=2.0, seed=4)
    points = sweep("dif", [1_000, 10_000, 100_000], scene)
    assert [p.threshold for p in points] == [1_000, 10_000, 100_000]
    assert all(a.tpr <= b.tpr and a.fpr <= b.fpr for a, b in zip(points, points[1:]))
    with pytest.raises(ValueError):
        sweep("nn", [], scene)
    with pytest.raises(ValueError):
        sweep("nn", [10, 5], scene)
