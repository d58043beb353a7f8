"""On-disk interchange formats: scan replays and scene descriptions.

Replay directory layout::

    replay/
      header.json          {"version": 1, "scan_count": N, "frame": "world",
                            "encoding": "text" | "npz"}
      scans/000000.txt     (text encoding: one file per scan)
      scans.npz            (npz encoding: packed arrays)

A text scan file is::

    tick 12
    pose 1.25 0.00 0.40
    x y z
    ...

Points are in the header's frame: ``world`` as-is, ``sensor`` relative to the
pose (the reader adds the pose back). Ticks must be strictly increasing and
the scan count must match the header.

Scene files are plain text, one statement per line, ``#`` comments allowed::

    scene v1
    name corridor
    seed 7
    extent x0 y0 z0 x1 y1 z1
    sensor range az elev elev_min elev_max jitter markers(0|1)
    box x0 y0 z0 x1 y1 z1
    moving size sx sy sz
    moving at t0 t1 cx cy cz
    pose x y z
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from .core import InvalidInputError
from .simgen import MovingBox, Scene, SceneBox, SensorSpec


@dataclass
class ReplayRecord:
    tick: int
    pose: np.ndarray  # (3,) world meters
    points: np.ndarray  # (N, 3) world meters


def write_replay(records, out_dir, encoding: str = "text") -> int:
    """Write records (iterable of (tick, pose, points)) to a replay directory.

    Returns the number of scans written.
    """
    if encoding not in ("text", "npz"):
        raise InvalidInputError(f"unknown replay encoding {encoding!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = 0
    if encoding == "text":
        scans = out / "scans"
        scans.mkdir(exist_ok=True)
        for tick, pose, points in records:
            points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
            with open(scans / f"{n:06d}.txt", "w") as f:
                f.write(f"tick {int(tick)}\n")
                f.write(f"pose {float(pose[0])!r} {float(pose[1])!r} {float(pose[2])!r}\n")
                for x, y, z in points:
                    f.write(f"{float(x)!r} {float(y)!r} {float(z)!r}\n")
            n += 1
    else:
        ticks, poses, counts, chunks = [], [], [], []
        for tick, pose, points in records:
            points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
            ticks.append(int(tick))
            poses.append(np.asarray(pose, dtype=np.float64))
            counts.append(len(points))
            chunks.append(points)
            n += 1
        np.savez_compressed(
            out / "scans.npz",
            ticks=np.array(ticks, dtype=np.int64),
            poses=np.array(poses, dtype=np.float64).reshape(-1, 3),
            counts=np.array(counts, dtype=np.int64),
            points=(
                np.concatenate(chunks) if chunks else np.empty((0, 3), dtype=np.float64)
            ),
        )
    header = {"version": 1, "scan_count": n, "frame": "world", "encoding": encoding}
    with open(out / "header.json", "w") as f:
        json.dump(header, f, indent=2)
        f.write("\n")
    return n


def read_replay(replay_dir) -> Iterator[ReplayRecord]:
    """Iterate the records of a replay directory, validating as it goes."""
    root = Path(replay_dir)
    header_path = root / "header.json"
    if not header_path.exists():
        raise InvalidInputError(f"{root} is not a replay directory (no header.json)")
    with open(header_path) as f:
        header = json.load(f)
    if header.get("version") != 1:
        raise InvalidInputError(f"unsupported replay version {header.get('version')!r}")
    frame = header.get("frame", "world")
    if frame not in ("world", "sensor"):
        raise InvalidInputError(f"unknown replay frame {frame!r}")
    encoding = header.get("encoding", "text")
    count = int(header["scan_count"])

    if encoding == "text":
        files = sorted((root / "scans").glob("*.txt"))
        if len(files) != count:
            raise InvalidInputError(
                f"replay header declares {count} scans but {len(files)} files exist"
            )
        last_tick = None
        for path in files:
            with open(path) as f:
                lines = f.read().splitlines()
            if len(lines) < 2 or not lines[0].startswith("tick ") or not lines[1].startswith("pose "):
                raise InvalidInputError(f"malformed scan file {path}")
            tick = int(lines[0].split()[1])
            pose = np.array([float(t) for t in lines[1].split()[1:4]])
            points = np.array(
                [[float(t) for t in ln.split()] for ln in lines[2:] if ln.strip()],
                dtype=np.float64,
            ).reshape(-1, 3)
            if last_tick is not None and tick <= last_tick:
                raise InvalidInputError(f"ticks not strictly increasing at {path}")
            last_tick = tick
            if frame == "sensor":
                points = points + pose
            yield ReplayRecord(tick=tick, pose=pose, points=points)
    elif encoding == "npz":
        with np.load(root / "scans.npz") as data:
            ticks = data["ticks"]
            poses = data["poses"]
            counts = data["counts"]
            points = data["points"]
        if len(ticks) != count:
            raise InvalidInputError(
                f"replay header declares {count} scans but npz holds {len(ticks)}"
            )
        if int(counts.sum()) != len(points):
            raise InvalidInputError("npz point counts do not match the point array")
        if len(ticks) > 1 and not np.all(np.diff(ticks) > 0):
            raise InvalidInputError("ticks not strictly increasing in npz replay")
        offset = 0
        for i in range(count):
            chunk = points[offset : offset + int(counts[i])]
            offset += int(counts[i])
            pose = poses[i]
            yield ReplayRecord(
                tick=int(ticks[i]),
                pose=pose,
                points=chunk + pose if frame == "sensor" else chunk,
            )
    else:
        raise InvalidInputError(f"unknown replay encoding {encoding!r}")


# ----------------------------------------------------------------------
# Scene files


def write_scene(scene: Scene, path) -> None:
    with open(path, "w") as f:
        f.write("scene v1\n")
        f.write(f"name {scene.name}\n")
        f.write(f"seed {scene.seed}\n")
        def fmt(*vals):
            return " ".join(repr(float(v)) for v in vals)

        e = scene.extent
        f.write(f"extent {fmt(*e.lo, *e.hi)}\n")
        s = scene.sensor
        f.write(
            f"sensor {fmt(s.max_range)} {s.n_azimuth} {s.n_elevation} "
            f"{fmt(s.elevation_min, s.elevation_max, s.range_jitter)} "
            f"{1 if s.max_range_markers else 0}\n"
        )
        for b in scene.boxes:
            f.write(f"box {fmt(*b.lo, *b.hi)}\n")
        if scene.moving is not None:
            f.write(f"moving size {fmt(*scene.moving.size)}\n")
            for t0, t1, c in scene.moving.schedule:
                f.write(f"moving at {t0} {t1} {fmt(*c)}\n")
        for p in scene.poses:
            f.write(f"pose {fmt(*p)}\n")


def read_scene(path) -> Scene:
    name = "unnamed"
    seed = 0
    extent = None
    sensor = None
    boxes: list[SceneBox] = []
    poses: list[tuple[float, float, float]] = []
    moving_size = None
    moving_schedule = []

    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            kind = parts[0]
            try:
                if kind == "scene":
                    if parts[1] != "v1":
                        raise InvalidInputError(f"unsupported scene version {parts[1]}")
                elif kind == "name":
                    name = parts[1]
                elif kind == "seed":
                    seed = int(parts[1])
                elif kind == "extent":
                    vals = [float(t) for t in parts[1:7]]
                    extent = SceneBox(tuple(vals[:3]), tuple(vals[3:]))
                elif kind == "sensor":
                    sensor = SensorSpec(
                        max_range=float(parts[1]),
                        n_azimuth=int(parts[2]),
                        n_elevation=int(parts[3]),
                        elevation_min=float(parts[4]),
                        elevation_max=float(parts[5]),
                        range_jitter=float(parts[6]),
                        max_range_markers=parts[7] == "1",
                    )
                elif kind == "box":
                    vals = [float(t) for t in parts[1:7]]
                    boxes.append(SceneBox(tuple(vals[:3]), tuple(vals[3:])))
                elif kind == "moving" and parts[1] == "size":
                    moving_size = tuple(float(t) for t in parts[2:5])
                elif kind == "moving" and parts[1] == "at":
                    moving_schedule.append(
                        (int(parts[2]), int(parts[3]), tuple(float(t) for t in parts[4:7]))
                    )
                elif kind == "pose":
                    poses.append(tuple(float(t) for t in parts[1:4]))
                else:
                    raise InvalidInputError(f"unknown statement {kind!r}")
            except (IndexError, ValueError) as exc:
                raise InvalidInputError(f"{path}:{lineno}: malformed line {line!r}") from exc

    if extent is None or sensor is None:
        raise InvalidInputError(f"{path}: scene needs extent and sensor statements")
    moving = None
    if moving_size is not None:
        moving = MovingBox(size=moving_size, schedule=tuple(moving_schedule))
    return Scene(
        name=name, extent=extent, boxes=boxes, sensor=sensor, poses=poses,
        moving=moving, seed=seed,
    )
