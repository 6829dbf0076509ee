"""Batch dataset runs: window, noise, filter, augment and represent every file in a tree.

Each sample's randomness is derived from the base seed and a hash of its
dataset-relative path, so outputs do not depend on worker count or order.
"""
from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from . import __version__
from ._seeding import derive_seed, fnv1a64, splitmix64
from .evaluation import confusion
from .events import Label, LabeledStream, SensorGeometry, WindowSpec, check_valid, extent, merge, slice_window
from .filters import make_filter
from .io import FORMATS, atomic_write, load_events, write_evs, write_graph, write_npy
from .noise import DEFAULT_LEVELS, DEFAULT_SUBDIV, LevelSet, NoiseSpec, draw_noise_level, generate_noise
from .representations import (
    DEFAULT_TIME_BINS,
    GRAPH_MAX_NEIGHBORS,
    GRAPH_RADIUS,
    TransformPolicy,
    event_count_image,
    event_spike_tensor,
    random_transform_policy,
    voxel_graph,
    voxel_grid,
)

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
THREADS_ENV = "EVPIPE_THREADS"
_TRANSFORM_SALT = 0x7472616E73666F72


@dataclass
class WindowConfig:
    t0: Optional[int] = None  # None: first event of each sample
    duration: int = 50_000
    time_bins: int = DEFAULT_TIME_BINS


@dataclass
class NoiseConfig:
    mode: str = "none"  # none | fixed | levels
    lam: float = 1.0
    levels: tuple = DEFAULT_LEVELS
    subdiv: int = DEFAULT_SUBDIV


@dataclass
class FilterConfig:
    kind: str = "none"  # none | nn | dif
    params: dict = field(default_factory=dict)


@dataclass
class ReprConfig:
    kind: str = "none"  # none | eci | voxel-grid | spike-tensor | voxel-graph
    voxels: Optional[tuple] = None
    radius: float = GRAPH_RADIUS
    max_neighbors: int = GRAPH_MAX_NEIGHBORS


# Training-set variants: original, filtered, fixed 1 Hz/px noise, noise injection.
PRESETS = {
    "original": {"noise": {"mode": "none"}, "filter": {"kind": "none"}},
    "filtered": {"noise": {"mode": "none"}, "filter": {"kind": "nn"}},
    "noise-1hz": {"noise": {"mode": "fixed", "lam": 1.0}, "filter": {"kind": "none"}},
    "noise-injection": {"noise": {"mode": "levels"}, "filter": {"kind": "none"}},
}


@dataclass
class RunConfig:
    input: str
    output: str
    format: Optional[str] = None  # atis | evs | csv; None: by extension
    geometry: Optional[tuple] = None
    window: Optional[WindowConfig] = None
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    representation: ReprConfig = field(default_factory=ReprConfig)
    transforms: Optional[TransformPolicy] = None
    base_seed: int = 0
    epoch_salt: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.noise.mode not in ("none", "fixed", "levels"):
            raise ValueError(f"unknown noise mode {self.noise.mode!r}")
        if self.noise.mode == "fixed":
            NoiseSpec(self.noise.lam, self.noise.subdiv)
        if self.noise.mode == "levels":
            LevelSet(tuple(self.noise.levels))
        if self.filter.kind != "none":
            make_filter(self.filter.kind, **self.filter.params).fit()
        if self.representation.kind not in ("none", "eci", "voxel-grid", "spike-tensor", "voxel-graph"):
            raise ValueError(f"unknown representation {self.representation.kind!r}")
        if self.format is not None and self.format not in FORMATS.values():
            raise ValueError(f"unknown format {self.format!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        raw = dict(raw)
        preset = raw.pop("preset", None)
        if preset is not None:
            if preset not in PRESETS:
                raise ValueError(f"unknown preset {preset!r}; expected one of {sorted(PRESETS)}")
            for key, value in PRESETS[preset].items():
                raw[key] = {**value, **raw.get(key, {})}
        noise = dict(raw.pop("noise", {}) or {})
        if "lambda" in noise:
            noise["lam"] = noise.pop("lambda")
        if "levels" in noise:
            noise["levels"] = tuple(noise["levels"])
        window = raw.pop("window", None)
        transforms = raw.pop("transforms", None)
        rep = dict(raw.pop("representation", {}) or {})
        if rep.get("voxels") is not None:
            rep["voxels"] = tuple(rep["voxels"])
        geometry = raw.pop("geometry", None)
        return cls(
            noise=NoiseConfig(**noise),
            filter=FilterConfig(**(raw.pop("filter", {}) or {})),
            representation=ReprConfig(**rep),
            window=WindowConfig(**window) if window is not None else None,
            transforms=TransformPolicy(**{k: tuple(v) if k == "crop_scale" else v
                                          for k, v in transforms.items()}) if transforms is not None else None,
            geometry=tuple(geometry) if geometry is not None else None,
            **raw,
        )

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def effective_seed(self) -> int:
        if self.epoch_salt:
            return splitmix64(self.base_seed ^ splitmix64(self.epoch_salt))
        return self.base_seed


def sample_id_for(rel_path: str) -> int:
    return fnv1a64(Path(rel_path).as_posix())


def discover(config: RunConfig):
    root = Path(config.input)
    if root.is_file():
        return [(root, root.name)]
    exts = {e for e, f in FORMATS.items() if config.format in (None, f)}
    files = sorted(p for p in root.rglob("*") if p.is_file() and p.suffix.lower() in exts)
    return [(p, p.relative_to(root).as_posix()) for p in files]


def _output_path(out_root: Path, rel: str, kind: str) -> Path:
    stem = out_root / Path(rel).with_suffix("")
    if kind == "none":
        return stem.with_suffix(".evs")
    if kind == "voxel-graph":
        return stem
    return stem.with_suffix(".npy")


def process_sample(config: RunConfig, path, rel: str) -> dict:
    """Run every configured stage on one file and write its outputs."""
    sid = sample_id_for(rel)
    seed = config.effective_seed
    record = {"input": rel, "sample_id": sid, "lambda": None, "counts": {}, "outputs": [], "status": "ok"}
    geometry = SensorGeometry(*config.geometry) if config.geometry else None
    data = load_events(path, config.format, geometry)
    labels = data.labels if isinstance(data, LabeledStream) else None
    stream = data.stream if labels is not None else data
    check_valid(stream)
    labeled = data if labels is not None else LabeledStream.uniform(stream, Label.SIGNAL)
    record["counts"]["input"] = len(stream)

    window = None
    if config.window is not None:
        w = config.window
        t0 = w.t0 if w.t0 is not None else (int(stream.t[0]) if len(stream) else 0)
        window = WindowSpec(t0, w.duration, w.time_bins)
        labeled = slice_window(labeled, window.t0, window.duration)
        record["counts"]["window"] = len(labeled)

    noise = config.noise
    if noise.mode != "none":
        lam = noise.lam if noise.mode == "fixed" else draw_noise_level(noise.levels, seed, sid)
        record["lambda"] = lam
        span = window or extent(labeled.stream)
        if lam > 0 and span is not None:
            generated = generate_noise(labeled.geometry, lam, span.duration, noise.subdiv,
                                       derive_seed(seed, sid), span.t0)
            labeled = merge(labeled, LabeledStream.uniform(generated, Label.NOISE))
        labels = labeled.labels
        record["counts"]["noise"] = len(labeled)

    if config.filter.kind != "none":
        keep = make_filter(config.filter.kind, **config.filter.params).predict(labeled.stream)
        if labels is not None:
            record["confusion"] = confusion(labeled, keep).to_dict()
        labeled = labeled.take(keep)
        record["counts"]["filter"] = len(labeled)

    if config.transforms is not None:
        draw = random_transform_policy(derive_seed(seed, _TRANSFORM_SALT), sid, labeled.geometry, config.transforms)
        labeled = draw(labeled)
        record["transform"] = {"flip": draw.flip, "dx": draw.dx, "dy": draw.dy, "crop": list(draw.crop_box)}
        record["counts"]["transform"] = len(labeled)

    out_root = Path(config.output)
    rep = config.representation
    target = _output_path(out_root, rel, rep.kind)
    if rep.kind == "none":
        atomic_write(target, write_evs(labeled if labels is not None else labeled.stream))
        record["outputs"].append(target.relative_to(out_root).as_posix())
        return record

    stream = labeled.stream
    if window is None:
        t0 = int(stream.t[0]) if len(stream) else 0
        window = WindowSpec(t0, WindowConfig().duration, DEFAULT_TIME_BINS)
    if rep.kind == "voxel-graph":
        graph = voxel_graph(stream, window, rep.voxels, rep.radius, rep.max_neighbors)
        nodes, edges = write_graph(graph)
        for name, text in (("nodes.csv", nodes), ("edges.csv", edges)):
            atomic_write(target / name, text)
            record["outputs"].append((target / name).relative_to(out_root).as_posix())
        record["nodes"] = graph.n_nodes
        record["edges"] = len(graph.edges)
        return record
    builders = {"eci": event_count_image, "voxel-grid": voxel_grid, "spike-tensor": event_spike_tensor}
    tensor = builders[rep.kind](stream, window)
    atomic_write(target, write_npy(tensor))
    record["outputs"].append(target.relative_to(out_root).as_posix())
    record["shape"] = list(tensor.shape)
    return record


def _safe_process(args):
    config, path, rel = args
    try:
        return process_sample(config, path, rel)
    except Exception as exc:  # one bad file must not stop the run
        return {"input": rel, "sample_id": sample_id_for(rel), "status": "failed", "error": f"{type(exc).__name__}: {exc}"}


def resolve_workers(requested: int) -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(int(env), 1)
    return requested


def dataset_run(config: RunConfig) -> dict:
    """Process every input file and write ``manifest.json`` last; returns the manifest."""
    start = time.perf_counter()
    items = discover(config)
    jobs = [(config, path, rel) for path, rel in items]
    workers = resolve_workers(config.workers)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_safe_process, jobs, chunksize=max(len(jobs) // (4 * workers), 1)))
    else:
        records = [_safe_process(job) for job in jobs]
    for rec in records:
        if rec["status"] != "ok":
            log.warning("failed on %s: %s", rec["input"], rec["error"])
    manifest = {
        "tool_version": __version__,
        "config": config.to_dict(),
        "base_seed": config.base_seed,
        "workers": workers,
        "wall_seconds": time.perf_counter() - start,
        "records": records,
        "failures": sum(r["status"] != "ok" for r in records),
    }
    atomic_write(Path(config.output) / MANIFEST_NAME, json.dumps(manifest, indent=2, default=list) + "\n")
    return manifest
