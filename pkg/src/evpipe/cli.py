"""``evpipe`` command line.

Exit codes: 0 success, 1 runtime or I/O failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .evaluation import benchmark_stream, confusion, throughput_bench
from .events import Label, LabeledStream, SensorGeometry, WindowSpec, extent
from .filters import make_filter, sweep
from .io import FormatError, atomic_write, load_events, save_events, write_evs, write_graph, write_npy
from .noise import (
    DEFAULT_SUBDIV,
    NoiseSpec,
    draw_noise_level,
    generate_noise,
    inject_noise,
    mix_recorded_noise,
)
from .pipeline import RunConfig, dataset_run, resolve_workers
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

log = logging.getLogger("evpipe")


class UsageError(Exception):
    pass


def _emit(payload, out=None):
    text = json.dumps(payload, indent=2) + "\n"
    if out:
        atomic_write(out, text)
    else:
        sys.stdout.write(text)


def _load(path, fmt, geometry):
    g = SensorGeometry(*geometry) if geometry else None
    return load_events(path, fmt, g)


def _split(data):
    if isinstance(data, LabeledStream):
        return data.stream, data
    return data, None


def _filter_params(args):
    if args.filter == "nn":
        return {"temporal_window": args.temporal_window_us, "per_polarity": args.per_polarity}
    return {
        "filter_length": args.filter_length_us,
        "scale": args.scale,
        "update_factor": args.update_factor,
        "interpolation": args.interpolation,
    }


def cmd_gen_noise(args):
    g = SensorGeometry(args.width, args.height)
    noise = generate_noise(g, args.lam, args.duration_us, args.subdiv, args.seed)
    save_events(args.out, LabeledStream.uniform(noise, Label.NOISE), fmt="evs")
    log.info("wrote %d noise events to %s", len(noise), args.out)
    return 0


def cmd_inject(args):
    stream, _ = _split(_load(args.input, args.format, args.geometry))
    window = WindowSpec(args.t0_us, args.duration_us) if args.duration_us else None
    if args.recording:
        recording, _ = _split(_load(args.recording, None, None))
        out = mix_recorded_noise(stream, recording, window, args.offset_us)
    else:
        lam = args.lam
        if args.levels:
            lam = draw_noise_level(args.levels, args.seed, args.sample_id)
        out = inject_noise(stream, NoiseSpec(lam, args.subdiv, args.seed), window)
        print(json.dumps({"lambda": lam, "signal": len(stream), "noise": int(out.is_noise.sum())}))
    save_events(args.out, out, fmt="evs")
    return 0


def cmd_filter(args):
    stream, labeled = _split(_load(args.input, args.format, args.geometry))
    keep = make_filter(args.filter, **_filter_params(args)).predict(stream)
    kept = labeled.take(keep) if labeled is not None else stream.take(keep)
    atomic_write(args.out, write_evs(kept))
    if args.report:
        if labeled is None:
            log.warning("input has no signal/noise labels; no report written")
        else:
            _emit(confusion(labeled, keep).to_dict(), args.report)
    log.info("kept %d of %d events", int(keep.sum()), len(stream))
    return 0


def cmd_eval_filter(args):
    _, labeled = _split(_load(args.input, args.format, args.geometry))
    if labeled is None:
        raise UsageError("eval-filter needs a labeled (EVS) input")
    params = _filter_params(args)
    params.pop("temporal_window" if args.filter == "nn" else "filter_length")
    points = sweep(args.filter, args.thresholds, labeled, **params)
    _emit([{"threshold": p.threshold, "TPR": p.tpr, "FPR": p.fpr} for p in points], args.out)
    return 0


def cmd_repr(args):
    stream, _ = _split(_load(args.input, args.format, args.geometry))
    t0 = args.t0_us if args.t0_us is not None else (int(stream.t[0]) if len(stream) else 0)
    window = WindowSpec(t0, args.duration_us, args.time_bins)
    span = extent(stream)
    if span is None or window.t1 <= span.t0 or window.t0 >= span.t1:
        log.warning("window [%d, %d) holds no events; output will be empty", window.t0, window.t1)
    if args.repr == "voxel-graph":
        voxels = tuple(args.voxels) if args.voxels else None
        graph = voxel_graph(stream, window, voxels, args.radius, args.max_neighbors)
        nodes, edges = write_graph(graph)
        out = Path(args.out)
        atomic_write(out / "nodes.csv", nodes)
        atomic_write(out / "edges.csv", edges)
        print(json.dumps({"nodes": graph.n_nodes, "edges": len(graph.edges)}))
        return 0
    build = {"eci": event_count_image, "voxel-grid": voxel_grid, "spike-tensor": event_spike_tensor}[args.repr]
    tensor = build(stream, window)
    atomic_write(args.out, write_npy(tensor))
    print(json.dumps({"shape": list(tensor.shape)}))
    return 0


def cmd_augment(args):
    data = _load(args.input, args.format, args.geometry)
    stream, _ = _split(data)
    policy = TransformPolicy(args.flip_p, args.max_translate, (args.crop_min, args.crop_max))
    draw = random_transform_policy(args.seed, args.sample_id, stream.geometry, policy)
    out = draw(data)
    save_events(args.out, out, fmt="evs")
    print(json.dumps({"flip": draw.flip, "dx": draw.dx, "dy": draw.dy, "crop": list(draw.crop_box)}))
    return 0


def cmd_bench(args):
    if args.repeats < 1:
        raise UsageError("--repeats must be >= 1")
    stream = benchmark_stream(args.events, args.lam, tuple(args.geometry), args.seed)
    desc = (f"moving bar + {args.lam} Hz/px shot noise on {args.geometry[0]}x{args.geometry[1]}, "
            f"{len(stream)} events")
    params = {"temporal_window": args.temporal_window_us} if args.filter == "nn" else {
        "filter_length": args.filter_length_us, "scale": args.scale, "update_factor": args.update_factor}
    report = throughput_bench(args.filter, stream, params, args.repeats, args.warmup, input_desc=desc)
    _emit(report.to_dict(), args.out)
    return 0


def cmd_dataset_run(args):
    raw = json.loads(Path(args.config).read_text())
    for key in ("input", "output", "workers", "base_seed", "epoch_salt"):
        value = getattr(args, key)
        if value is not None:
            raw[key] = value
    try:
        config = RunConfig.from_dict(raw)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad config: {exc}") from None
    config.workers = resolve_workers(config.workers)
    manifest = dataset_run(config)
    print(json.dumps({"records": len(manifest["records"]), "failures": manifest["failures"]}))
    return 1 if manifest["failures"] else 0


def _add_input(p):
    p.add_argument("--in", dest="input", required=True, help="event file (.bin, .evs, .csv)")
    p.add_argument("--format", choices=["atis", "evs", "csv"], help="override format detection")
    p.add_argument("--geometry", type=int, nargs=2, metavar=("W", "H"))


def _add_filter_flags(p):
    p.add_argument("--filter", required=True, choices=["nn", "dif"])
    p.add_argument("--temporal-window-us", type=int, default=10_000)
    p.add_argument("--filter-length-us", type=float, default=15_000)
    p.add_argument("--scale", type=int, default=4)
    p.add_argument("--update-factor", type=float, default=0.5)
    p.add_argument("--interpolation", choices=["frequency", "predictive"], default="frequency")
    p.add_argument("--per-polarity", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="evpipe", description="Event-camera noise injection, denoising and representations.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-noise", help="generate a pure shot-noise EVS file")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True, help="Hz per pixel")
    p.add_argument("--duration-us", type=int, required=True)
    p.add_argument("--subdiv", type=int, default=DEFAULT_SUBDIV)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_noise)

    p = sub.add_parser("inject", help="add synthetic or recorded noise to a stream")
    _add_input(p)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--levels", type=float, nargs="+", help="draw lambda from these levels")
    p.add_argument("--sample-id", type=int, default=0)
    p.add_argument("--subdiv", type=int, default=DEFAULT_SUBDIV)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--recording", help="real noise recording to mix in instead")
    p.add_argument("--offset-us", type=int, default=0)
    p.add_argument("--t0-us", type=int, default=0)
    p.add_argument("--duration-us", type=int, help="noise window; default is the signal extent")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_inject)

    p = sub.add_parser("filter", help="denoise a stream")
    _add_input(p)
    _add_filter_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--report", help="confusion report JSON (labeled input only)")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("eval-filter", help="TPR/FPR sweep over filter thresholds")
    _add_input(p)
    _add_filter_flags(p)
    p.add_argument("--thresholds", type=float, nargs="+", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval_filter)

    p = sub.add_parser("repr", help="build an event representation")
    _add_input(p)
    p.add_argument("--repr", required=True, choices=["eci", "voxel-grid", "spike-tensor", "voxel-graph"])
    p.add_argument("--t0-us", type=int)
    p.add_argument("--duration-us", type=int, default=50_000)
    p.add_argument("--time-bins", type=int, default=DEFAULT_TIME_BINS)
    p.add_argument("--voxels", type=int, nargs=3, metavar=("VX", "VY", "VT"))
    p.add_argument("--radius", type=float, default=GRAPH_RADIUS)
    p.add_argument("--max-neighbors", type=int, default=GRAPH_MAX_NEIGHBORS)
    p.add_argument("--out", required=True, help=".npy path, or a directory for voxel-graph")
    p.set_defaults(func=cmd_repr)

    p = sub.add_parser("augment", help="apply a seeded random flip/translate/crop")
    _add_input(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sample-id", type=int, default=0)
    p.add_argument("--flip-p", type=float, default=0.5)
    p.add_argument("--max-translate", type=float, default=0.1)
    p.add_argument("--crop-min", type=float, default=0.8)
    p.add_argument("--crop-max", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("bench", help="single-core filter throughput")
    p.add_argument("--filter", required=True, choices=["nn", "dif"])
    p.add_argument("--events", type=int, default=10_000_000)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--geometry", type=int, nargs=2, default=[240, 180], metavar=("W", "H"))
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--warmup", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--temporal-window-us", type=int, default=10_000)
    p.add_argument("--filter-length-us", type=float, default=15_000)
    p.add_argument("--scale", type=int, default=4)
    p.add_argument("--update-factor", type=float, default=0.5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("dataset-run", help="process a dataset tree from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--input")
    p.add_argument("--output")
    p.add_argument("--workers", type=int)
    p.add_argument("--base-seed", type=int)
    p.add_argument("--epoch-salt", type=int)
    p.set_defaults(func=cmd_dataset_run)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (OSError, FormatError) as exc:
        print(f"evpipe: error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        # parameter values the parser accepted but the library rejects
        parser.error(str(exc))


if __name__ == "__main__":
    sys.exit(main())
