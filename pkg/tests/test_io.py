import json

import numpy as np
import pytest

from evpipe import EventStream, LabeledStream, SensorGeometry, WindowSpec, voxel_graph
from evpipe.io import (
    FormatError,
    atomic_write,
    detect_format,
    load_events,
    read_atis_bin,
    read_csv,
    read_evs,
    read_graph,
    read_npy,
    save_events,
    write_atis_bin,
    write_csv,
    write_evs,
    write_graph,
    write_npy,
)

from oracles import random_stream


def test_atis_known_record():
    s = read_atis_bin(bytes([0x0A, 0x14, 0x80, 0x03, 0xE8]))
    assert list(s) == [(1000, 10, 20, 1)]
    assert write_atis_bin(s) == bytes([0x0A, 0x14, 0x80, 0x03, 0xE8])


def test_atis_negative_polarity_and_high_bits():
    s = read_atis_bin(bytes([0xFF, 0x00, 0x7F, 0xFF, 0xFF]))
    assert list(s) == [((1 << 23) - 1, 255, 0, -1)]


def test_atis_timestamp_wrap():
    s = EventStream((4, 4), [(1 << 23) - 10, (1 << 23) + 5, 5 << 21, 6 << 21, 7 << 21, (1 << 24) + 7],
                    [0, 1, 2, 3, 3, 1], [0] * 6, [1, 1, -1, 1, -1, 1])
    data = write_atis_bin(s)
    assert read_atis_bin(data, s.geometry) == s


def test_atis_truncated_record():
    with pytest.raises(FormatError, match="offset 5"):
        read_atis_bin(bytes(8))


def test_atis_range_errors_name_index():
    s = EventStream((300, 4), [0, 1], [0, 256], [0, 0], [1, 1])
    with pytest.raises(ValueError, match="1"):
        write_atis_bin(s)
    gap = EventStream((4, 4), [0, 1 << 22], [0, 0], [0, 0], [1, 1])
    with pytest.raises(ValueError):
        write_atis_bin(gap)


def test_evs_round_trip_labeled_10k():
    rng = np.random.default_rng(0)
    s = random_stream(rng, n=10_000, geometry=(640, 480))
    ls = LabeledStream(s, rng.integers(0, 2, size=len(s)))
    assert read_evs(write_evs(ls)) == ls
    assert read_evs(write_evs(s)) == s


def test_evs_layout():
    s = EventStream((3, 2), [7], [2], [1], [-1])
    data = write_evs(s)
    assert data[:4] == b"EVS1"
    assert len(data) == 16 + 14
    assert int.from_bytes(data[4:6], "little") == 3
    assert int.from_bytes(data[8:16], "little") == 1
    assert data[-2:] == bytes([0xFF, 0xFF])  # p=-1 as i8, label 255


def test_evs_errors():
    data = write_evs(EventStream((3, 2), [7, 8], [2, 0], [1, 0], [-1, 1]))
    with pytest.raises(FormatError, match="offset"):
        read_evs(data[:-3])
    with pytest.raises(FormatError, match="magic"):
        read_evs(b"XXXX" + data[4:])
    mixed = bytearray(data)
    mixed[-1] = 0
    with pytest.raises(FormatError, match="unlabeled"):
        read_evs(bytes(mixed))


def test_evs_empty_labeled():
    empty = LabeledStream(EventStream.empty((3, 2)), [])
    assert read_evs(write_evs(empty)) == empty.stream
    assert read_evs(write_evs(empty), labeled=True) == empty


def test_csv_round_trip_and_header():
    rng = np.random.default_rng(1)
    s = random_stream(rng, n=200)
    text = write_csv(s, header=True)
    assert text.startswith("t,x,y,p\n")
    assert "\r" not in text
    assert read_csv(text, s.geometry) == s
    assert read_csv(write_csv(s), s.geometry) == s


def test_npy_read_by_numpy(tmp_path):
    rng = np.random.default_rng(2)
    for shape in [(3,), (2, 5), (20, 7, 9), (10, 2, 3, 4)]:
        a = rng.standard_normal(shape).astype(np.float32)
        data = write_npy(a)
        header_len = int.from_bytes(data[8:10], "little")
        assert data[:8] == b"\x93NUMPY\x01\x00"
        assert (10 + header_len) % 64 == 0
        assert data[9 + header_len:10 + header_len] == b"\n"
        path = tmp_path / "a.npy"
        path.write_bytes(data)
        back = np.load(path)
        assert back.dtype == np.dtype("<f4") and back.shape == shape
        assert np.array_equal(back, a)
        assert np.array_equal(read_npy(data), a)


def test_npy_scalar_and_casting():
    data = write_npy(np.arange(6, dtype=np.int64).reshape(2, 3))
    assert read_npy(data).dtype == np.float32


def test_graph_round_trip():
    rng = np.random.default_rng(3)
    s = random_stream(rng, n=800, geometry=(40, 40), t_max=50_000)
    g = voxel_graph(s, WindowSpec(0, 50_000, 10), (20, 20, 20), 0.1, 5)
    assert len(g.edges) > 0
    nodes, edges = write_graph(g)
    assert nodes.splitlines()[0] == "id,x,y,t,avg_p,count"
    assert edges.splitlines()[0] == "src,dst"
    assert read_graph(nodes, edges) == g


def test_file_helpers(tmp_path):
    s = EventStream((8, 8), [1, 2], [0, 7], [3, 4], [1, -1])
    for ext in (".bin", ".evs", ".csv"):
        path = tmp_path / f"s{ext}"
        save_events(path, s)
        assert load_events(path, geometry=SensorGeometry(8, 8)) == s
    with pytest.raises(ValueError, match="format"):
        detect_format(tmp_path / "s.txt")
    atomic_write(tmp_path / "deep" / "x.json", json.dumps({"a": 1}))
    assert json.loads((tmp_path / "deep" / "x.json").read_text()) == {"a": 1}
    assert not list((tmp_path / "deep").glob("*.tmp*"))
