import numpy as np
import pytest

from evpipe import (
    EventCountImage,
    EventSpikeTensor,
    EventStream,
    LabeledStream,
    RandomEventTransform,
    VoxelGraphBuilder,
    VoxelGrid,
    WindowSpec,
    crop,
    event_count_image,
    event_spike_tensor,
    hflip,
    random_transform_policy,
    translate,
    voxel_graph,
    voxel_grid,
)
from evpipe.representations import TransformPolicy, default_voxels

from oracles import graph_brute, histogram_brute, random_stream


def test_count_image_hand_case():
    s = EventStream((3, 2), [0, 1, 2, 99], [0, 0, 2, 1], [0, 0, 1, 1], [1, 1, -1, 1])
    eci = event_count_image(s, WindowSpec(0, 50))
    assert eci.dtype == np.float32 and eci.shape == (2, 2, 3)
    assert eci[1, 0, 0] == 2 and eci[0, 1, 2] == 1 and eci.sum() == 3


def test_spike_tensor_binning_and_layout():
    s = EventStream((2, 1), [0, 9, 10, 19], [0, 1, 0, 1], [0, 0, 0, 0], [1, -1, -1, 1])
    win = WindowSpec(0, 20, 2)
    est = event_spike_tensor(s, win)
    assert est[0, 1, 0, 0] == 1 and est[0, 0, 0, 1] == 1
    assert est[1, 0, 0, 0] == 1 and est[1, 1, 0, 1] == 1
    vg = voxel_grid(s, win)
    assert vg.shape == (4, 1, 2)
    assert np.array_equal(vg[1], est[0, 1]) and np.array_equal(vg[2], est[1, 0])


def test_tensors_match_histogram_oracle():
    rng = np.random.default_rng(0)
    for _ in range(20):
        s = random_stream(rng, geometry=(17, 9))
        win = WindowSpec(int(rng.integers(0, 1000)), int(rng.integers(1, 300_000)), int(rng.integers(1, 12)))
        assert np.array_equal(event_spike_tensor(s, win), histogram_brute(s, win.t0, win.duration, win.T))


def test_empty_window_gives_zeros():
    s = EventStream((4, 4), [100], [0], [0], [1])
    assert event_spike_tensor(s, WindowSpec(0, 50, 10)).sum() == 0
    g = voxel_graph(s, WindowSpec(0, 50, 10))
    assert g.n_nodes == 0 and g.edges.shape == (0, 2)


def test_graph_node_grouping():
    s = EventStream((9, 9), [0, 10, 10], [0, 0, 8], [0, 0, 8], [1, -1, 1])
    g = voxel_graph(s, WindowSpec(0, 100, 10), (2, 2, 2), radius=2.0, max_neighbors=16)
    assert g.n_nodes == 2
    assert g.counts.tolist() == [2, 1]
    assert g.avg_polarity.tolist() == [0.0, 1.0]
    assert np.allclose(g.positions[0], [0, 0, 0.05])
    assert g.edges.tolist() == [[0, 1]]


def test_graph_cap_is_mutual():
    # a hub with three equidistant leaves; a cap of two keeps the two lowest ids
    s = EventStream((101, 101), [0, 0, 0, 0], [50, 40, 60, 50], [50, 50, 50, 40], [1, 1, 1, 1])
    g = voxel_graph(s, WindowSpec(0, 10, 1), (101, 101, 1), radius=0.15, max_neighbors=2)
    ids = {tuple(np.rint(p[:2] * 100).astype(int)): i for i, p in enumerate(g.positions)}
    hub = ids[(50, 50)]
    assert g.degrees()[hub] == 2
    assert np.all(g.degrees() <= 2)


def test_graph_matches_oracle_dense():
    rng = np.random.default_rng(1)
    for _ in range(10):
        s = random_stream(rng, geometry=(30, 30), t_max=20_000, max_n=600)
        win = WindowSpec(0, 20_000, 5)
        g = voxel_graph(s, win, (15, 15, 10), 0.12, 3)
        pos, avg_p, counts, edges = graph_brute(s, 0, 20_000, (15, 15, 10), 0.12, 3)
        assert np.allclose(g.positions, pos, atol=1e-12)
        assert np.array_equal(g.counts, counts)
        assert [tuple(e) for e in g.edges.tolist()] == edges


def test_default_voxels():
    assert default_voxels(type("G", (), {"width": 240, "height": 180})(), 10) == (30, 22, 10)


def test_estimators_use_first_event_by_default():
    s = EventStream((4, 4), [1000, 1010, 70_000], [0, 1, 2], [0, 1, 2], [1, -1, 1])
    assert EventCountImage().fit().transform(s).sum() == 2
    assert EventCountImage(t0=0, duration=100_000).transform(s).sum() == 3
    assert VoxelGrid(time_bins=4).transform(s).shape == (8, 4, 4)
    assert EventSpikeTensor(time_bins=4).transform(s).shape == (4, 2, 4, 4)
    g = VoxelGraphBuilder(voxels=(2, 2, 2)).transform(s)
    assert g.counts.tolist() == [2]  # (0, 0) and (1, 1) share a voxel
    assert VoxelGrid().get_params()["time_bins"] == 10


def test_flip_translate_crop():
    s = EventStream((10, 8), [0, 1, 2], [0, 9, 5], [0, 7, 3], [1, -1, 1])
    assert hflip(s).x.tolist() == [9, 0, 4]
    assert hflip(hflip(s)) == s
    t = translate(s, 1, 1)
    assert t.x.tolist() == [1, 6] and t.y.tolist() == [1, 4]
    c = crop(s, 4, 2, 5, 5)
    assert c.geometry.width == 5 and list(c) == [(2, 1, 1, 1)]
    with pytest.raises(ValueError):
        crop(s, 8, 0, 5, 5)


def test_transforms_keep_labels_aligned():
    s = EventStream((10, 8), [0, 1, 2], [0, 9, 5], [0, 7, 3], [1, -1, 1])
    ls = LabeledStream(s, [0, 1, 1])
    assert translate(ls, 1, 1).labels.tolist() == [0, 1]
    assert crop(ls, 4, 2, 5, 5).labels.tolist() == [1]


def test_random_policy_is_deterministic_and_bounded():
    from evpipe import SensorGeometry

    g = SensorGeometry(100, 50)
    draws = [random_transform_policy(3, sid, g) for sid in range(200)]
    assert draws[5] == random_transform_policy(3, 5, g)
    assert any(d.flip for d in draws) and not all(d.flip for d in draws)
    assert all(abs(d.dx) <= 10 and abs(d.dy) <= 5 for d in draws)
    assert all(80 <= d.crop_box[2] <= 100 and 40 <= d.crop_box[3] <= 50 for d in draws)
    with pytest.raises(ValueError):
        TransformPolicy(flip_p=2)


def test_random_transform_estimator():
    rng = np.random.default_rng(2)
    s = random_stream(rng, n=500, geometry=(40, 30))
    est = RandomEventTransform(seed=1).fit()
    out = est.transform(s, sample_id=4)
    assert out == est.transform(s, sample_id=4)
    draw = est.draw(s.geometry, 4)
    assert out.geometry.width == draw.crop_box[2]
