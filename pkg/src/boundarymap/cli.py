"""Command-line harness: replay scans, verify against the dense reference,
query exported maps, convert exports, and benchmark kernel backends.

Log verbosity comes from the BOUNDARYMAP_LOG environment variable (DEBUG,
INFO, WARNING, ...); everything else is flags and config files.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time

import numpy as np

from . import _kernels, bench, boundary, formats, runner
from .config import RunConfig
from .core import InvalidInputError, OccState, ProjectionAxis, world_to_voxel_array
from .simgen import builtin_scenes, replay_records

log = logging.getLogger("boundarymap")


def _setup_logging():
    level = os.environ.get("BOUNDARYMAP_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _load_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    return cfg.apply_overrides(args)


def _records_for(cfg: RunConfig):
    """Scan records plus the scene (None when replaying from a directory)."""
    if cfg.replay:
        return formats.read_replay(cfg.replay), None
    scene = cfg.load_scene()
    records = ((tick, pose, pts) for tick, pose, pts in replay_records(scene))
    return records, scene


def _limited(records, limit):
    for i, rec in enumerate(records):
        if limit is not None and i >= limit:
            break
        yield rec


def cmd_replay(args) -> int:
    cfg = _load_config(args)
    params = cfg.prob_params()
    axis = cfg.projection_axis()
    raw, scene = _records_for(cfg)
    local_size = cfg.local_size
    if scene is not None and "local_size" in scene.meta and args.local_size is None:
        local_size = scene.meta["local_size"]
    framework = runner.make_framework(
        params, axis, local_size, cfg.slide_threshold, cfg.table_size
    )
    records = (
        (r.tick, r.pose, r.points) if isinstance(r, formats.ReplayRecord) else r
        for r in _limited(raw, cfg.scans)
    )
    result = runner.run_replay(framework, records)
    framework.finalize()

    if args.metrics:
        with open(args.metrics, "w") as f:
            f.write(runner.METRICS_HEADER + "\n")
            for row in result.rows:
                f.write(row + "\n")
        log.info("wrote %d metric rows to %s", len(result.rows), args.metrics)
    if args.map_csv:
        boundary.export_csv(framework.global_map, args.map_csv, params.resolution, cfg.axis)
    if args.map_ply:
        boundary.export_ply(framework.global_map, args.map_ply, params.resolution, axis)
    report = framework.global_map.memory_report()
    print(
        f"replayed {result.n_scans} scans: {report['boundary_voxel_count']} boundary voxels, "
        f"{report['column_count']} columns, {report['estimated_bytes']} bytes (analytic)"
    )
    return 0


def cmd_verify(args) -> int:
    cfg = _load_config(args)
    if not cfg.scene or cfg.scene not in builtin_scenes():
        raise InvalidInputError("verify requires a built-in scene (--scene)")
    params = cfg.prob_params()
    axis = cfg.projection_axis()
    scene = cfg.load_scene()
    if cfg.scans:
        scene.poses = scene.poses[: cfg.scans]
    report, framework, oracle, comparison = runner.run_verify(
        scene, params, axis, slide_threshold=cfg.slide_threshold,
        table_size=cfg.table_size,
    )
    for line in report.lines():
        print(line)
    if args.mismatch_csv and comparison.mismatches:
        from .oracle import export_mismatches_csv

        export_mismatches_csv(args.mismatch_csv, comparison)
        print(f"mismatches dumped to {args.mismatch_csv}")
    return 0 if report.passed else 1


def cmd_query(args) -> int:
    grid, resolution, axis_name = boundary.load_csv(args.map)
    axis = ProjectionAxis.from_name(axis_name)
    points = []
    with open(args.points) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            toks = line.split()
            if len(toks) != 3:
                raise InvalidInputError(f"point line needs 3 fields, got {line!r}")
            points.append([float(t) for t in toks])
    points = np.array(points, dtype=np.float64).reshape(-1, 3)

    grid.reset_stats()
    states = []
    t0 = time.perf_counter()
    if len(points):
        voxels = axis.to_internal(world_to_voxel_array(points, resolution))
        for v in voxels:
            states.append(grid.determine_occupancy((int(v[0]), int(v[1]), int(v[2])), boundary.W_PLUS))
    elapsed = time.perf_counter() - t0

    with open(args.out, "w") as f:
        for s in states:
            f.write(OccState(s).name + "\n")
    n = max(len(points), 1)
    print(
        f"queried {len(points)} points in {elapsed:.4f}s "
        f"({elapsed / n * 1e6:.2f} us/query), "
        f"mean boundary voxels per query {grid.stats.mean_column_voxels():.2f}, "
        f"mean binary-search comparisons {grid.stats.mean_comparisons():.2f}"
    )
    return 0


def cmd_export(args) -> int:
    grid, resolution, axis_name = boundary.load_csv(args.map)
    axis = ProjectionAxis.from_name(axis_name)
    if args.ply:
        boundary.export_ply(grid, args.ply, resolution, axis)
        print(f"wrote {grid.voxel_count} vertices to {args.ply}")
    if args.csv:
        boundary.export_csv(grid, args.csv, resolution, axis_name)
        print(f"wrote {grid.voxel_count} rows to {args.csv}")
    return 0


def cmd_make_replay(args) -> int:
    cfg = _load_config(args)
    scene = cfg.load_scene()
    if cfg.scans:
        scene.poses = scene.poses[: cfg.scans]
    n = formats.write_replay(replay_records(scene), args.out, encoding=args.encoding)
    print(f"wrote {n} scans to {args.out} ({args.encoding})")
    return 0


def cmd_bench(args) -> int:
    rows = bench.run_benchmarks(
        reps=args.reps, n_rays=args.rays, replay_scans=args.replay_scans
    )
    print(f"active backend: {_kernels.BACKEND_NAME}")
    for line in bench.format_rows(rows):
        print(line)
    return 0


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--scene", help="built-in scene name or scene file")
    p.add_argument("--replay", help="replay directory")
    p.add_argument("--resolution", type=float, help="map resolution in meters")
    p.add_argument("--axis", choices=["x", "y", "z"], help="projection axis")
    p.add_argument("--local-size", dest="local_size", type=float, nargs=3,
                   metavar=("LX", "LY", "LZ"), help="local map size in meters")
    p.add_argument("--slide-threshold", dest="slide_threshold", type=int,
                   help="slide trigger threshold in voxels")
    p.add_argument("--table-size", dest="table_size", type=int,
                   help="initial hash table size (power of two)")
    p.add_argument("--scans", type=int, help="cap on replayed scans")
    p.add_argument("--seed", type=int, help="scene seed")
    p.add_argument("--sensor-range", dest="sensor_range", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="boundarymap",
        description="Boundary-voxel occupancy mapping: replay, verify, query, export, bench.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("replay", help="replay scans into the framework and export metrics/maps")
    _add_config_flags(p)
    p.add_argument("--metrics", help="per-scan metrics CSV output")
    p.add_argument("--map-csv", dest="map_csv", help="final boundary map CSV output")
    p.add_argument("--map-ply", dest="map_ply", help="final boundary map PLY output")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("verify", help="replay framework and dense reference side by side")
    _add_config_flags(p)
    p.add_argument("--mismatch-csv", dest="mismatch_csv", help="CSV dump of disagreeing voxels")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("query", help="query an exported map CSV with a points file")
    p.add_argument("map", help="map CSV produced by replay/export")
    p.add_argument("points", help="text file with one 'x y z' per line")
    p.add_argument("--out", default="states.txt", help="output states file")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("export", help="convert a map CSV to PLY (or re-export CSV)")
    p.add_argument("map", help="map CSV produced by replay")
    p.add_argument("--ply", help="PLY output path")
    p.add_argument("--csv", help="CSV output path")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("make-replay", help="materialize a scene into a replay directory")
    _add_config_flags(p)
    p.add_argument("--out", required=True, help="replay directory to create")
    p.add_argument("--encoding", choices=["text", "npz"], default="text")
    p.set_defaults(func=cmd_make_replay)

    p = sub.add_parser("bench", help="benchmark compiled vs pure-Python kernels")
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--rays", type=int, default=2000)
    p.add_argument("--replay-scans", dest="replay_scans", type=int, default=40)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
