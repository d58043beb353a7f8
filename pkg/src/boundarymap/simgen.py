"""Deterministic synthetic environments and a simulated range sensor.

Scenes are unions of axis-aligned boxes (meters) plus an optional moving box
with a scripted schedule. The sensor casts a fixed azimuth/elevation grid of
rays; each ray returns the nearest box intersection within range, or nothing.
Everything is seed-deterministic; scan generation for distinct ticks is pure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import InvalidInputError


@dataclass(frozen=True)
class SceneBox:
    """Axis-aligned box in meters, inclusive lo / exclusive-ish hi."""

    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def __post_init__(self):
        if any(self.hi[a] < self.lo[a] for a in range(3)):
            raise InvalidInputError(f"degenerate box {self.lo} .. {self.hi}")

    def center(self) -> tuple[float, float, float]:
        return tuple((self.lo[a] + self.hi[a]) / 2.0 for a in range(3))

    def contains_point(self, p) -> bool:
        return all(self.lo[a] <= p[a] <= self.hi[a] for a in range(3))


@dataclass(frozen=True)
class MovingBox:
    """Box of fixed size whose center follows a piecewise-constant schedule.

    ``schedule`` entries are ``(tick_from, tick_to, center)``; the box exists
    for ticks in ``[tick_from, tick_to)`` and is absent outside all entries.
    """

    size: tuple[float, float, float]
    schedule: tuple[tuple[int, int, tuple[float, float, float]], ...]

    def box_at(self, tick: int) -> Optional[SceneBox]:
        for t0, t1, center in self.schedule:
            if t0 <= tick < t1:
                if not all(math.isfinite(c) for c in center):
                    raise InvalidInputError(f"non-finite moving box center {center}")
                half = tuple(s / 2.0 for s in self.size)
                return SceneBox(
                    tuple(center[a] - half[a] for a in range(3)),
                    tuple(center[a] + half[a] for a in range(3)),
                )
        return None


@dataclass(frozen=True)
class SensorSpec:
    """Ray pattern: full azimuth sweep times a band of elevations."""

    max_range: float
    n_azimuth: int = 24
    n_elevation: int = 8
    elevation_min: float = -1.0  # radians
    elevation_max: float = 1.0
    range_jitter: float = 0.0  # uniform +-jitter on returned ranges, meters
    max_range_markers: bool = False  # emit a point just past range on no hit

    def __post_init__(self):
        if self.max_range <= 0.0:
            raise InvalidInputError(f"sensor range must be positive, got {self.max_range}")

    def directions(self) -> np.ndarray:
        az = np.linspace(-math.pi, math.pi, self.n_azimuth, endpoint=False)
        el = np.linspace(self.elevation_min, self.elevation_max, self.n_elevation)
        azg, elg = np.meshgrid(az, el, indexing="ij")
        ce = np.cos(elg.ravel())
        return np.stack(
            [ce * np.cos(azg.ravel()), ce * np.sin(azg.ravel()), np.sin(elg.ravel())],
            axis=1,
        )


@dataclass
class Scene:
    name: str
    extent: SceneBox
    boxes: list[SceneBox]
    sensor: SensorSpec
    poses: list[tuple[float, float, float]]
    moving: Optional[MovingBox] = None
    seed: int = 0
    # suggested verification knobs, consumed by the CLI/acceptance harness
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for b in self.boxes:
            if not (
                self.extent.contains_point(b.lo) and self.extent.contains_point(b.hi)
            ):
                raise InvalidInputError(f"box {b} extends outside the scene extent")

    @property
    def n_scans(self) -> int:
        return len(self.poses)

    def boxes_at(self, tick: int) -> list[SceneBox]:
        if self.moving is None:
            return self.boxes
        mb = self.moving.box_at(tick)
        return self.boxes + [mb] if mb is not None else self.boxes


def ray_box_distances(origin: np.ndarray, dirs: np.ndarray, boxes: list[SceneBox]) -> np.ndarray:
    """Distance to the nearest box along each unit ray, inf when none is hit.

    Slab test per ray and box; an intersection only counts when the entry
    point is strictly in front of the origin (rays starting inside a box do
    not hit it).
    """
    n = len(dirs)
    best = np.full(n, np.inf)
    if not boxes:
        return best
    lo = np.array([b.lo for b in boxes])  # (B, 3)
    hi = np.array([b.hi for b in boxes])
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs  # (N, 3), +-inf where a component is zero
        t1 = (lo[None, :, :] - origin) * inv[:, None, :]
        t2 = (hi[None, :, :] - origin) * inv[:, None, :]
    # A zero direction component outside the slab yields inf/-inf pairs that
    # drop out through the min/max below; inside the slab it yields nan,
    # which must not poison the reduction.
    t_near = np.nanmax(np.minimum(t1, t2), axis=2)
    t_far = np.nanmin(np.maximum(t1, t2), axis=2)
    valid = (t_near <= t_far) & (t_near > 1e-9)
    t_near = np.where(valid, t_near, np.inf)
    return t_near.min(axis=1)


def simulate_scan(scene: Scene, pose, tick: int) -> np.ndarray:
    """Points returned by one scan taken at ``pose`` during ``tick``.

    Returns an (N, 3) array of world points; rays without a box intersection
    inside the sensor range contribute nothing unless max-range markers are
    enabled, in which case they contribute a point just past the range (the
    map update truncates it, carving free space without recording a hit).
    """
    if not scene.extent.contains_point(pose):
        raise InvalidInputError(f"pose {tuple(pose)} outside scene extent")
    origin = np.asarray(pose, dtype=np.float64)
    dirs = scene.sensor.directions()
    dist = ray_box_distances(origin, dirs, scene.boxes_at(tick))
    if scene.sensor.range_jitter > 0.0:
        rng = np.random.default_rng((scene.seed << 20) ^ tick)
        dist = dist + rng.uniform(
            -scene.sensor.range_jitter, scene.sensor.range_jitter, size=len(dist)
        )
        dist = np.maximum(dist, 1e-6)
    hit = dist <= scene.sensor.max_range
    points = origin + dirs[hit] * dist[hit, None]
    if scene.sensor.max_range_markers:
        marker_dist = scene.sensor.max_range * 1.5
        markers = origin + dirs[~hit] * marker_dist
        points = np.concatenate([points, markers])
    return points


def replay_records(scene: Scene):
    """Yield (tick, pose, points) for every scan of the scene."""
    for tick, pose in enumerate(scene.poses):
        yield tick, np.asarray(pose, dtype=np.float64), simulate_scan(scene, pose, tick)


# ----------------------------------------------------------------------
# Built-in scenes


def _shell_boxes(extent: SceneBox, interior: SceneBox) -> list[SceneBox]:
    """Six wall slabs enclosing ``interior`` inside ``extent``."""
    (x0, y0, z0), (x1, y1, z1) = extent.lo, extent.hi
    (ix0, iy0, iz0), (ix1, iy1, iz1) = interior.lo, interior.hi
    return [
        SceneBox((x0, y0, z0), (ix0, y1, z1)),  # x- cap
        SceneBox((ix1, y0, z0), (x1, y1, z1)),  # x+ cap
        SceneBox((ix0, y0, z0), (ix1, iy0, z1)),  # y- wall
        SceneBox((ix0, iy1, z0), (ix1, y1, z1)),  # y+ wall
        SceneBox((ix0, iy0, z0), (ix1, iy1, iz0)),  # floor
        SceneBox((ix0, iy0, iz1), (ix1, iy1, z1)),  # ceiling
    ]


def _line_poses(p0, p1, n: int) -> list[tuple[float, float, float]]:
    ts = np.linspace(0.0, 1.0, n)
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    return [tuple(p0 + t * (p1 - p0)) for t in ts]


def corridor_scene(
    length: float = 40.0,
    n_scans: int = 200,
    ray_pattern: tuple[int, int] = (24, 9),
    seed: int = 7,
) -> Scene:
    """Straight corridor, one-way trajectory, no local-map re-entry.

    Extent ``length x 8 x 4`` m with a 3.2 m square free tube; the sensor
    reaches the tube walls (1.6 m away) but its 1.7 m sphere stays inside an
    8 x 8 x 4 m local map. Max-range markers are on so free space is carved
    along the corridor axis as well.
    """
    extent = SceneBox((0.0, -4.0, -2.0), (length, 4.0, 2.0))
    interior = SceneBox((0.2, -1.6, -1.6), (length - 0.2, 1.6, 1.6))
    sensor = SensorSpec(
        max_range=1.7,
        n_azimuth=ray_pattern[0],
        n_elevation=ray_pattern[1],
        elevation_min=-1.3,
        elevation_max=1.3,
        max_range_markers=True,
    )
    poses = _line_poses((2.0, 0.0, 0.0), (length - 2.0, 0.0, 0.0), n_scans)
    return Scene(
        name="corridor",
        extent=extent,
        boxes=_shell_boxes(extent, interior),
        sensor=sensor,
        poses=poses,
        seed=seed,
        meta={"local_size": (8.0, 8.0, 4.0), "expect_reentry": False},
    )


def loop_scene(n_scans: int = 520, seed: int = 11) -> Scene:
    """Square circuit around a central pillar; revisits slid-out space.

    Observation is dense (many rays, small steps) so that most voxels
    saturate within one local-map residency; the remaining disagreements
    against a dense reference come only from voxels that slid out while
    partially observed and later re-entered.
    """
    extent = SceneBox((0.0, 0.0, -2.0), (16.0, 16.0, 2.0))
    walls = [
        SceneBox((0.0, 0.0, -2.0), (16.0, 16.0, -1.6)),  # floor
        SceneBox((0.0, 0.0, 1.6), (16.0, 16.0, 2.0)),  # ceiling
        SceneBox((6.4, 6.4, -2.0), (9.6, 9.6, 2.0)),  # pillar
    ]
    sensor = SensorSpec(
        max_range=1.7,
        n_azimuth=64,
        n_elevation=21,
        elevation_min=-1.3,
        elevation_max=1.3,
        max_range_markers=True,
    )
    corners = [(4.8, 4.8), (11.2, 4.8), (11.2, 11.2), (4.8, 11.2)]
    perimeter = 4 * 6.4
    # 1.25 laps so the start region is revisited after sliding out
    total = 1.25 * perimeter
    step = total / (n_scans - 1)
    poses = []
    s = 0.0
    for _ in range(n_scans):
        lap = s % perimeter
        edge = int(lap // 6.4)
        frac = (lap % 6.4) / 6.4
        x0, y0 = corners[edge]
        x1, y1 = corners[(edge + 1) % 4]
        poses.append((x0 + frac * (x1 - x0), y0 + frac * (y1 - y0), 0.0))
        s += step
    return Scene(
        name="loop",
        extent=extent,
        boxes=walls,
        sensor=sensor,
        poses=poses,
        seed=seed,
        meta={"local_size": (8.0, 8.0, 4.0), "expect_reentry": True},
    )


def aniso_scene(n_scans: int = 200, seed: int = 13) -> Scene:
    """Long thin tube: extent 48 x 8 x 5 m (largest/smallest ratio 9.6)."""
    extent = SceneBox((0.0, 0.0, 0.0), (48.0, 8.0, 5.0))
    interior = SceneBox((0.2, 2.6, 1.0), (47.8, 5.4, 4.0))
    sensor = SensorSpec(
        max_range=1.7,
        n_azimuth=24,
        n_elevation=9,
        elevation_min=-1.3,
        elevation_max=1.3,
        max_range_markers=True,
    )
    poses = _line_poses((2.0, 4.0, 2.5), (46.0, 4.0, 2.5), n_scans)
    return Scene(
        name="aniso",
        extent=extent,
        boxes=_shell_boxes(extent, interior),
        sensor=sensor,
        poses=poses,
        seed=seed,
        meta={"local_size": (8.0, 8.0, 4.0), "expect_reentry": False},
    )


def dynamic_scene(n_scans: int = 160, seed: int = 17) -> Scene:
    """Stationary sensor watching a box that appears and later vacates.

    Timeline: the space is empty long enough to saturate toward free, the box
    then occupies the line of sight long enough to saturate occupied, and
    after it vacates the back wall is observed again so the freed voxels
    collect misses every scan.
    """
    extent = SceneBox((0.0, -4.0, -2.0), (8.0, 4.0, 2.0))
    walls = [
        SceneBox((3.0, -4.0, -2.0), (3.4, 4.0, 2.0)),  # back wall
        SceneBox((0.0, -4.0, -2.0), (8.0, 4.0, -1.6)),  # floor
        SceneBox((0.0, -4.0, 1.6), (8.0, 4.0, 2.0)),  # ceiling
    ]
    sensor = SensorSpec(
        max_range=2.8,
        n_azimuth=48,
        n_elevation=17,
        elevation_min=-0.6,
        elevation_max=0.6,
        max_range_markers=False,
    )
    appear, vacate = 44, 88
    moving = MovingBox(size=(0.6, 0.8, 0.8), schedule=((appear, vacate, (2.1, 0.0, 0.0)),))
    poses = [(1.0, 0.0, 0.0)] * n_scans
    return Scene(
        name="dynamic",
        extent=extent,
        boxes=walls,
        sensor=sensor,
        poses=poses,
        moving=moving,
        seed=seed,
        meta={
            "local_size": (8.0, 8.0, 4.0),
            "expect_reentry": False,
            "appear_tick": appear,
            "vacate_tick": vacate,
        },
    )


_BUILTINS = {
    "corridor": corridor_scene,
    "loop": loop_scene,
    "aniso": aniso_scene,
    "dynamic": dynamic_scene,
}


def builtin_scenes() -> dict:
    """Name -> factory for the built-in scene catalog."""
    return dict(_BUILTINS)


def make_scene(name: str, **overrides) -> Scene:
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise InvalidInputError(
            f"unknown scene {name!r}; built-ins: {sorted(_BUILTINS)}"
        ) from None
    return factory(**overrides)
