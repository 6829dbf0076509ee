"""Readers and writers for event files, NPY tensors and voxel-graph CSVs.

Formats
-------
ATIS ``.bin``
    5 bytes per event: x (u8), y (u8), then polarity in bit 7 of byte 2 and
    a 23-bit microsecond timestamp in the remaining 23 bits (big-endian).
    Timestamps wrap at 2**23; a drop of more than 2**22 marks a wrap.
EVS ``.evs``
    ``b"EVS1"`` + width u16 + height u16 + count u64, then 14-byte records
    ``t u64, x u16, y u16, p i8, label u8`` (all little-endian). Label 255
    means unlabeled.
CSV
    ``t,x,y,p`` lines, ``\\n`` terminated.
"""
from __future__ import annotations

import ast
import io
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .events import EventStream, LabeledStream, SensorGeometry, infer_geometry

ATIS_RECORD = 5
ATIS_WRAP = 1 << 23
ATIS_WRAP_DETECT = 1 << 22

EVS_MAGIC = b"EVS1"
EVS_HEADER = struct.Struct("<4sHHQ")
EVS_RECORD = np.dtype(
    [("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "i1"), ("label", "u1")]
)
EVS_UNLABELED = 255

NPY_MAGIC = b"\x93NUMPY"
NPY_ALIGN = 64


class FormatError(ValueError):
    """Malformed input bytes."""


# -- ATIS ------------------------------------------------------------------

def read_atis_bin(data: bytes, geometry=None) -> EventStream:
    if len(data) % ATIS_RECORD:
        offset = len(data) - len(data) % ATIS_RECORD
        raise FormatError(f"truncated ATIS record at byte offset {offset}")
    raw = np.frombuffer(data, dtype=np.uint8).reshape(-1, ATIS_RECORD)
    x = raw[:, 0].astype(np.int32)
    y = raw[:, 1].astype(np.int32)
    p = np.where(raw[:, 2] & 0x80, 1, -1).astype(np.int8)
    ts = (
        (raw[:, 2].astype(np.int64) & 0x7F) << 16
        | raw[:, 3].astype(np.int64) << 8
        | raw[:, 4].astype(np.int64)
    )
    if len(ts) > 1:
        wraps = np.concatenate([[0], np.cumsum(np.diff(ts) < -ATIS_WRAP_DETECT)])
        ts = ts + wraps * ATIS_WRAP
    if geometry is None:
        geometry = infer_geometry(x, y)
    return EventStream(geometry, ts, x, y, p)


def write_atis_bin(stream: EventStream) -> bytes:
    """Encode a stream; timestamps beyond 2**23 us are written modulo the wrap.

    Consecutive events must be less than 2**22 us apart or the reader could not
    tell a wrap from an ordinary gap.
    """
    t, x, y = stream.t, stream.x, stream.y
    bad = np.flatnonzero((x < 0) | (x > 255) | (y < 0) | (y > 255))
    if len(bad):
        i = int(bad[0])
        raise ValueError(f"event {i} at ({x[i]}, {y[i]}) does not fit the 8-bit ATIS coordinates")
    if len(t):
        if t[0] < 0:
            raise ValueError("event 0 has a negative timestamp")
        gaps = np.diff(t)
        bad = np.flatnonzero((gaps < 0) | (gaps >= ATIS_WRAP_DETECT))
        if len(bad):
            i = int(bad[0]) + 1
            raise ValueError(f"event {i} is out of order or more than 2**22 us after its predecessor")
        if t[0] >= ATIS_WRAP:
            raise ValueError("event 0 starts at or after 2**23 us; rebase timestamps before writing")
    ts = t & (ATIS_WRAP - 1)
    out = np.empty((len(t), ATIS_RECORD), dtype=np.uint8)
    out[:, 0] = x
    out[:, 1] = y
    out[:, 2] = ((ts >> 16) & 0x7F) | np.where(stream.p > 0, 0x80, 0)
    out[:, 3] = (ts >> 8) & 0xFF
    out[:, 4] = ts & 0xFF
    return out.tobytes()


# -- EVS -------------------------------------------------------------------

def write_evs(stream) -> bytes:
    """Encode an :class:`EventStream` (unlabeled) or :class:`LabeledStream`."""
    if isinstance(stream, LabeledStream):
        labels = stream.labels
        stream = stream.stream
    else:
        labels = np.full(len(stream), EVS_UNLABELED, dtype=np.uint8)
    g = stream.geometry
    if g.width > 0xFFFF or g.height > 0xFFFF:
        raise ValueError("EVS geometry must fit in 16 bits")
    if len(stream) and stream.t.min() < 0:
        raise ValueError("EVS timestamps must be non-negative")
    rec = np.empty(len(stream), dtype=EVS_RECORD)
    rec["t"] = stream.t
    rec["x"] = stream.x
    rec["y"] = stream.y
    rec["p"] = stream.p
    rec["label"] = labels
    return EVS_HEADER.pack(EVS_MAGIC, g.width, g.height, len(stream)) + rec.tobytes()


def read_evs(data: bytes, labeled=None):
    """Decode EVS bytes to a :class:`LabeledStream`, or an :class:`EventStream` if unlabeled.

    ``labeled=None`` decides from the label bytes. An empty file carries no
    labels, so pass ``labeled=True`` to get an empty :class:`LabeledStream`.
    """
    if len(data) < EVS_HEADER.size:
        raise FormatError(f"EVS header truncated at byte offset {len(data)}")
    magic, width, height, count = EVS_HEADER.unpack_from(data)
    if magic != EVS_MAGIC:
        raise FormatError(f"bad EVS magic {magic!r}")
    body = len(data) - EVS_HEADER.size
    if body != count * EVS_RECORD.itemsize:
        offset = EVS_HEADER.size + min(body // EVS_RECORD.itemsize, count) * EVS_RECORD.itemsize
        raise FormatError(
            f"EVS header declares {count} records but payload holds {body} bytes "
            f"(mismatch at byte offset {offset})"
        )
    rec = np.frombuffer(data, dtype=EVS_RECORD, offset=EVS_HEADER.size, count=count)
    stream = EventStream(
        SensorGeometry(width, height),
        rec["t"].astype(np.int64),
        rec["x"],
        rec["y"],
        rec["p"],
    )
    labels = rec["label"]
    unlabeled = labels == EVS_UNLABELED
    if labeled is False or (labeled is None and unlabeled.all()):
        return stream
    if labeled and count and unlabeled.all():
        raise FormatError("file holds no labels")
    if unlabeled.any():
        raise FormatError(f"record {int(np.argmax(unlabeled))} is unlabeled in a labeled file")
    return LabeledStream(stream, labels)


# -- CSV -------------------------------------------------------------------

def write_csv(stream: EventStream, header: bool = False) -> str:
    buf = io.StringIO()
    if header:
        buf.write("t,x,y,p\n")
    if len(stream):
        np.savetxt(buf, stream.to_array(), fmt="%d", delimiter=",", newline="\n")
    return buf.getvalue()


def read_csv(text: str, geometry=None) -> EventStream:
    lines = text.splitlines()
    if lines and not lines[0].lstrip().lstrip("-")[:1].isdigit():
        lines = lines[1:]
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        return EventStream.empty(geometry or SensorGeometry(1, 1))
    try:
        arr = np.loadtxt(lines, delimiter=",", dtype=np.int64, ndmin=2)
    except ValueError as exc:
        raise FormatError(f"bad CSV event line: {exc}") from None
    return EventStream.from_array(arr, geometry)


# -- NPY -------------------------------------------------------------------

def write_npy(tensor) -> bytes:
    """Serialise as an NPY v1.0 file: ``<f4``, C order."""
    arr = np.ascontiguousarray(tensor, dtype="<f4")
    if arr.ndim == 0:
        raise ValueError("tensor shape must have at least one dimension")
    shape = "(" + ", ".join(str(d) for d in arr.shape) + ("," if arr.ndim == 1 else "") + ")"
    header = "{'descr': '<f4', 'fortran_order': False, 'shape': %s, }" % shape
    preamble = len(NPY_MAGIC) + 2 + 2
    pad = -(preamble + len(header) + 1) % NPY_ALIGN
    header = (header + " " * pad + "\n").encode("latin1")
    return NPY_MAGIC + b"\x01\x00" + struct.pack("<H", len(header)) + header + arr.tobytes()


def read_npy(data: bytes) -> np.ndarray:
    """Parse NPY v1.0 bytes written by :func:`write_npy`."""
    if data[:6] != NPY_MAGIC or data[6:8] != b"\x01\x00":
        raise FormatError("not an NPY v1.0 file")
    (hlen,) = struct.unpack_from("<H", data, 8)
    meta = ast.literal_eval(data[10 : 10 + hlen].decode("latin1"))
    if meta["descr"] != "<f4" or meta["fortran_order"]:
        raise FormatError(f"unsupported NPY header {meta}")
    shape = tuple(meta["shape"])
    payload = data[10 + hlen :]
    expected = 4 * int(np.prod(shape, dtype=np.int64))
    if len(payload) != expected:
        raise FormatError(f"NPY payload is {len(payload)} bytes, expected {expected}")
    return np.frombuffer(payload, dtype="<f4").reshape(shape)


# -- voxel graph -----------------------------------------------------------

def write_graph(graph):
    """Return ``(nodes_csv, edges_csv)`` text for a voxel graph."""
    nodes = io.StringIO()
    nodes.write("id,x,y,t,avg_p,count\n")
    for i in range(graph.n_nodes):
        px, py, pt = graph.positions[i]
        nodes.write(
            f"{i},{float(px)!r},{float(py)!r},{float(pt)!r},"
            f"{float(graph.avg_polarity[i])!r},{int(graph.counts[i])}\n"
        )
    edges = io.StringIO()
    edges.write("src,dst\n")
    for src, dst in graph.edges:
        edges.write(f"{int(src)},{int(dst)}\n")
    return nodes.getvalue(), edges.getvalue()


def read_graph(nodes_csv: str, edges_csv: str):
    from .representations import VoxelGraph

    rows = [ln.split(",") for ln in nodes_csv.splitlines()[1:] if ln.strip()]
    for i, row in enumerate(rows):
        if int(row[0]) != i:
            raise FormatError(f"node line {i + 1} has id {row[0]}, expected {i}")
    positions = np.array([[float(v) for v in r[1:4]] for r in rows], dtype=np.float64).reshape(-1, 3)
    avg_p = np.array([float(r[4]) for r in rows], dtype=np.float64)
    counts = np.array([int(r[5]) for r in rows], dtype=np.int64)
    edge_rows = [ln.split(",") for ln in edges_csv.splitlines()[1:] if ln.strip()]
    edges = np.array([[int(a), int(b)] for a, b in edge_rows], dtype=np.int64).reshape(-1, 2)
    if len(edges) and (edges.min() < 0 or edges.max() >= len(rows)):
        raise FormatError("edge references an unknown node id")
    return VoxelGraph(positions, avg_p, counts, edges)


# -- filesystem helpers ----------------------------------------------------

def atomic_write(path, data) -> None:
    """Write bytes or text via a temp file and rename so readers never see a torn file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


FORMATS = {".bin": "atis", ".evs": "evs", ".csv": "csv"}


def detect_format(path) -> str:
    try:
        return FORMATS[Path(path).suffix.lower()]
    except KeyError:
        raise ValueError(f"cannot infer event format from {path}; pass a format explicitly") from None


def load_events(path, fmt=None, geometry=None):
    """Read an event file into an EventStream or LabeledStream."""
    fmt = fmt or detect_format(path)
    if fmt == "atis":
        return read_atis_bin(Path(path).read_bytes(), geometry)
    if fmt == "evs":
        out = read_evs(Path(path).read_bytes())
        if geometry is not None:
            if isinstance(out, LabeledStream):
                return LabeledStream(out.stream.with_geometry(geometry), out.labels)
            return out.with_geometry(geometry)
        return out
    if fmt == "csv":
        return read_csv(Path(path).read_text(), geometry)
    raise ValueError(f"unknown event format {fmt!r}")


def save_events(path, stream, fmt=None, header=False) -> None:
    fmt = fmt or detect_format(path)
    if fmt == "evs":
        atomic_write(path, write_evs(stream))
        return
    if isinstance(stream, LabeledStream):
        stream = stream.stream
    if fmt == "atis":
        atomic_write(path, write_atis_bin(stream))
    elif fmt == "csv":
        atomic_write(path, write_csv(stream, header=header))
    else:
        raise ValueError(f"unknown event format {fmt!r}")
