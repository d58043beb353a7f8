import numpy as np
import pytest

from boundarymap.core import InvalidInputError, ProbParams, ProjectionAxis
from boundarymap.runner import make_framework, run_replay
from boundarymap.simgen import (
    MovingBox,
    Scene,
    SceneBox,
    SensorSpec,
    builtin_scenes,
    corridor_scene,
    dynamic_scene,
    loop_scene,
    make_scene,
    ray_box_distances,
    replay_records,
    simulate_scan,
)


def cube_scene(side=10.0, sensor=None):
    half = side / 2
    extent = SceneBox((-half - 1, -half - 1, -half - 1), (half + 1, half + 1, half + 1))
    interior = SceneBox((-half, -half, -half), (half, half, half))
    walls = [
        SceneBox((-half - 1, -half - 1, -half - 1), (-half, half + 1, half + 1)),
        SceneBox((half, -half - 1, -half - 1), (half + 1, half + 1, half + 1)),
        SceneBox((-half, -half - 1, -half - 1), (half, -half, half + 1)),
        SceneBox((-half, half, -half - 1), (half, half + 1, half + 1)),
        SceneBox((-half, -half, -half - 1), (half, half, -half)),
        SceneBox((-half, -half, half), (half, half, half + 1)),
    ]
    sensor = sensor or SensorSpec(max_range=20.0, n_azimuth=4, n_elevation=1,
                                  elevation_min=0.0, elevation_max=0.0)
    return Scene(name="cube", extent=extent, boxes=walls, sensor=sensor,
                 poses=[(0.0, 0.0, 0.0)])


class TestSimulateScan:
    def test_cube_center_axis_rays_hit_at_half_side(self):
        scene = cube_scene(side=10.0)
        points = simulate_scan(scene, (0.0, 0.0, 0.0), 0)
        assert len(points) == 4
        dists = np.linalg.norm(points, axis=1)
        assert np.allclose(dists, 5.0)

    def test_vertical_rays(self):
        sensor = SensorSpec(max_range=20.0, n_azimuth=1, n_elevation=3,
                            elevation_min=-np.pi / 2, elevation_max=np.pi / 2)
        scene = cube_scene(side=10.0, sensor=sensor)
        points = simulate_scan(scene, (0.0, 0.0, 0.0), 0)
        assert np.allclose(np.linalg.norm(points, axis=1), 5.0)

    def test_ray_outside_all_boxes_returns_nothing(self):
        extent = SceneBox((-10, -10, -10), (10, 10, 10))
        box = SceneBox((1.0, 5.0, -1.0), (3.0, 6.0, 1.0))  # off to the +y side
        sensor = SensorSpec(max_range=8.0, n_azimuth=1, n_elevation=1,
                            elevation_min=0.0, elevation_max=0.0)
        scene = Scene(name="t", extent=extent, boxes=[box], sensor=sensor,
                      poses=[(0.0, 0.0, 0.0)])
        # the single ray points along -x, parallel to and outside the box
        points = simulate_scan(scene, (0.0, 0.0, 0.0), 0)
        assert len(points) == 0

    def test_occlusion_then_vacate(self):
        # single ray along -x from (9,0,0): the moving box sits in front of
        # the wall at tick 0 and vanishes at tick 1, exposing the wall
        extent = SceneBox((-1, -4, -4), (10, 4, 4))
        wall = SceneBox((6.0, -4, -4), (6.5, 4, 4))
        moving = MovingBox(size=(1.0, 2.0, 2.0), schedule=((0, 1, (7.5, 0.0, 0.0)),))
        sensor = SensorSpec(max_range=9.0, n_azimuth=1, n_elevation=1,
                            elevation_min=0.0, elevation_max=0.0)
        scene = Scene(name="t", extent=extent, boxes=[wall], sensor=sensor,
                      poses=[(9.0, 0.0, 0.0), (9.0, 0.0, 0.0)], moving=moving)
        p0 = simulate_scan(scene, scene.poses[0], 0)
        p1 = simulate_scan(scene, scene.poses[1], 1)
        assert len(p0) == 1 and len(p1) == 1
        assert np.linalg.norm(p0[0] - np.array([9.0, 0, 0])) == pytest.approx(1.0)
        assert np.linalg.norm(p1[0] - np.array([9.0, 0, 0])) == pytest.approx(2.5)

    def test_pose_outside_extent_rejected(self):
        scene = cube_scene()
        with pytest.raises(InvalidInputError):
            simulate_scan(scene, (100.0, 0.0, 0.0), 0)

    def test_max_range_markers(self):
        extent = SceneBox((-10, -10, -10), (10, 10, 10))
        sensor = SensorSpec(max_range=2.0, n_azimuth=6, n_elevation=1,
                            elevation_min=0.0, elevation_max=0.0,
                            max_range_markers=True)
        scene = Scene(name="t", extent=extent, boxes=[], sensor=sensor,
                      poses=[(0.0, 0.0, 0.0)])
        points = simulate_scan(scene, (0.0, 0.0, 0.0), 0)
        assert len(points) == 6
        assert np.allclose(np.linalg.norm(points, axis=1), 3.0)  # 1.5 * range

    def test_seed_determinism_with_jitter(self):
        sensor = SensorSpec(max_range=20.0, n_azimuth=8, n_elevation=3,
                            elevation_min=-0.5, elevation_max=0.5, range_jitter=0.05)
        s1 = cube_scene(sensor=sensor)
        s2 = cube_scene(sensor=sensor)
        a = simulate_scan(s1, (0.0, 0.0, 0.0), 3)
        b = simulate_scan(s2, (0.0, 0.0, 0.0), 3)
        assert np.array_equal(a, b)
        c = simulate_scan(s1, (0.0, 0.0, 0.0), 4)
        assert not np.array_equal(a, c)


class TestRayBoxOracle:
    @staticmethod
    def _march(origin, direction, boxes, ts):
        samples = origin + np.outer(ts, direction)
        inside = np.zeros(len(ts), dtype=bool)
        for b in boxes:
            inside |= np.all((samples >= b.lo) & (samples <= b.hi), axis=1)
        return inside

    def test_against_point_marching(self):
        # point-marching at step d/10 is the independent oracle; a coarse
        # disagreement is only excused when a 20x finer march shows the ray
        # grazes a box with a chord thinner than the coarse step
        rng = np.random.default_rng(12)
        d = 0.1
        step = d / 10.0
        boxes = []
        for _ in range(6):
            lo = rng.uniform(-3, 2, 3)
            hi = lo + rng.uniform(0.5, 2.0, 3)
            boxes.append(SceneBox(tuple(lo), tuple(hi)))
        max_range = 5.0
        ts = np.arange(step, max_range + step, step)
        fine = np.arange(step / 20.0, max_range + step, step / 20.0)
        n_checked = 0
        for _ in range(110):
            origin = rng.uniform(-4, 4, 3)
            if any(b.contains_point(origin) for b in boxes):
                continue
            dirs = rng.normal(size=(100, 3))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            dist = ray_box_distances(origin, dirs, boxes)
            for k in range(len(dirs)):
                inside = self._march(origin, dirs[k], boxes, ts)
                march_hit = bool(inside.any())
                march_dist = ts[inside][0] if march_hit else np.inf
                slab_hit = dist[k] <= max_range
                if march_hit:
                    assert slab_hit, "marching found a hit the slab test missed"
                    assert abs(dist[k] - march_dist) <= step
                elif slab_hit:
                    fi = self._march(origin, dirs[k], boxes, fine)
                    assert fi.any(), "slab hit with no sampled point inside any box"
                    runs = np.diff(np.flatnonzero(np.diff(np.r_[0, fi, 0])))[::2]
                    assert runs.max() * (step / 20.0) < 2 * step, (
                        "coarse march missed a chord it should have sampled"
                    )
                n_checked += 1
        assert n_checked >= 10_000


class TestBuiltinScenes:
    def test_catalog(self):
        catalog = builtin_scenes()
        assert set(catalog) == {"corridor", "loop", "aniso", "dynamic"}
        for name in catalog:
            scene = make_scene(name)
            assert scene.n_scans > 0

    def test_unknown_name_errors(self):
        with pytest.raises(InvalidInputError):
            make_scene("warehouse")

    def test_aniso_extent_ratio(self):
        scene = make_scene("aniso")
        spans = [scene.extent.hi[a] - scene.extent.lo[a] for a in range(3)]
        assert max(spans) / min(spans) >= 8.0

    def test_corridor_has_no_reentry(self):
        scene = corridor_scene(length=14.0, n_scans=60)
        params = ProbParams.from_probabilities(
            resolution=0.2, sensor_range=scene.sensor.max_range
        )
        fw = make_framework(params, ProjectionAxis.Z, scene.meta["local_size"],
                            track_provenance=True)
        run_replay(fw, replay_records(scene))
        assert len(fw.reentered) == 0

    def test_loop_has_reentry(self):
        scene = loop_scene(n_scans=200)
        params = ProbParams.from_probabilities(
            resolution=0.2, sensor_range=scene.sensor.max_range
        )
        fw = make_framework(params, ProjectionAxis.Z, scene.meta["local_size"],
                            track_provenance=True)
        run_replay(fw, replay_records(scene))
        assert len(fw.reentered) > 0

    def test_dynamic_schedule(self):
        scene = dynamic_scene()
        appear = scene.meta["appear_tick"]
        vacate = scene.meta["vacate_tick"]
        assert scene.moving.box_at(appear - 1) is None
        assert scene.moving.box_at(appear) is not None
        assert scene.moving.box_at(vacate) is None
        assert len(scene.boxes_at(appear)) == len(scene.boxes) + 1
