import numpy as np
import pytest

from boundarymap import _kernels
from boundarymap._kernels import available_backends, fallback, raycast
from boundarymap.core import InvalidInputError, world_to_voxel

BACKENDS = available_backends()
WIDE_LO = np.array([-10_000] * 3)
WIDE_HI = np.array([10_000] * 3)


def trace_one(origin, point, d, max_range, backend=fallback, lo=WIDE_LO, hi=WIDE_HI):
    miss, hit, skipped = raycast(origin, [point], d, max_range, lo, hi, backend=backend)
    return miss, hit, skipped


class TestTraversalSemantics:
    def test_axis_ray(self):
        miss, hit, _ = trace_one((0.0, 0.0, 0.0), (0.52, 0.0, 0.0), 0.1, 10.0)
        assert hit.tolist() == [[5, 0, 0]]
        assert miss.tolist() == [[0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0], [4, 0, 0]]

    def test_same_voxel_point_is_hit_only(self):
        miss, hit, _ = trace_one((0.0, 0.0, 0.0), (0.04, 0.0, 0.0), 0.1, 10.0)
        assert hit.tolist() == [[0, 0, 0]]
        assert len(miss) == 0

    def test_zero_distance_point_skipped(self):
        miss, hit, skipped = trace_one((0.3, 0.3, 0.3), (0.3, 0.3, 0.3), 0.1, 10.0)
        assert skipped == 1
        assert len(miss) == 0 and len(hit) == 0

    def test_truncated_ray_records_no_hit(self):
        miss, hit, _ = trace_one((0.0, 0.0, 0.0), (5.0, 0.0, 0.0), 0.1, 1.0)
        assert len(hit) == 0
        # the final traversed voxel is where the ray was cut off
        assert miss[-1].tolist() == [10, 0, 0]

    def test_clip_box_filters(self):
        lo = np.array([1, 0, 0])
        hi = np.array([3, 0, 0])
        miss, hit, _ = trace_one((0.0, 0.0, 0.0), (0.52, 0.0, 0.0), 0.1, 10.0, lo=lo, hi=hi)
        assert miss.tolist() == [[1, 0, 0], [2, 0, 0], [3, 0, 0]]
        assert len(hit) == 0  # endpoint voxel 5 is outside the box

    def test_endpoint_voxel_matches_world_to_voxel(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            o = rng.uniform(-2, 2, 3)
            p = rng.uniform(-2, 2, 3)
            if np.allclose(o, p):
                continue
            d = 0.13
            miss, hit, _ = trace_one(o, p, d, 100.0)
            assert hit.tolist() == [list(world_to_voxel(p, d))]

    def test_path_is_6_connected_from_origin_voxel(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            o = rng.uniform(-3, 3, 3)
            p = rng.uniform(-3, 3, 3)
            d = 0.2
            miss, hit, _ = trace_one(o, p, d, 100.0)
            path = np.concatenate([miss, hit])
            assert path[0].tolist() == list(world_to_voxel(o, d))
            steps = np.abs(np.diff(path, axis=0)).sum(axis=1)
            assert np.all(steps == 1)

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidInputError):
            raycast((0.0, np.nan, 0.0), [(1.0, 0.0, 0.0)], 0.1, 1.0, WIDE_LO, WIDE_HI)
        with pytest.raises(InvalidInputError):
            raycast((0.0, 0.0, 0.0), [(np.inf, 0.0, 0.0)], 0.1, 1.0, WIDE_LO, WIDE_HI)

    def test_empty_scan(self):
        miss, hit, skipped = raycast(
            (0.0, 0.0, 0.0), np.empty((0, 3)), 0.1, 1.0, WIDE_LO, WIDE_HI
        )
        assert len(miss) == 0 and len(hit) == 0 and skipped == 0


@pytest.mark.skipif("native" not in BACKENDS, reason="compiled kernel not built")
class TestBackendEquivalence:
    """The compiled kernel must be bit-identical to the pure-Python one."""

    def _compare(self, origin, points, d, max_range, lo, hi):
        native = BACKENDS["native"]
        m1, h1, s1 = raycast(origin, points, d, max_range, lo, hi, backend=fallback)
        m2, h2, s2 = raycast(origin, points, d, max_range, lo, hi, backend=native)
        assert s1 == s2
        assert np.array_equal(m1, m2)
        assert np.array_equal(h1, h2)

    def test_random_scans(self):
        rng = np.random.default_rng(3)
        for trial in range(20):
            origin = rng.uniform(-5, 5, 3)
            n = rng.integers(1, 80)
            points = origin + rng.normal(size=(n, 3)) * rng.uniform(0.01, 4.0)
            d = float(rng.choice([0.05, 0.1, 0.25, 0.5]))
            max_range = float(rng.uniform(0.5, 6.0))
            lo = np.array([-40, -40, -40])
            hi = np.array([40, 40, 40])
            self._compare(origin, points, d, max_range, lo, hi)

    def test_degenerate_rays(self):
        pts = [
            (0.0, 0.0, 0.0),  # zero distance -> skipped
            (0.1, 0.0, 0.0),  # axis aligned
            (0.1, 0.1, 0.1),  # exact diagonal (tMax ties)
            (-0.35, 0.05, -0.05),  # tie coordinates
            (7.0, 7.0, 0.0),  # truncated diagonal
        ]
        self._compare(
            (0.0, 0.0, 0.0), pts, 0.1, 2.0, np.array([-30] * 3), np.array([30] * 3)
        )

    def test_rounding_helpers_agree(self):
        from boundarymap.core import round_half_away

        native = BACKENDS["native"]
        rng = np.random.default_rng(4)
        qs = np.concatenate(
            [
                rng.uniform(-100, 100, 500),
                np.arange(-10, 10) + 0.5,
                np.array([0.15 / 0.1, 0.05 / 0.1, -0.05 / 0.1]),
            ]
        )
        # probe the compiled rounding via the start voxel of a unit-grid ray
        for q in qs:
            o = np.array([q, 0.25, 0.25])
            miss, _, _ = raycast(o, [o + [5.0, 0, 0]], 1.0, 100.0, WIDE_LO, WIDE_HI, backend=native)
            assert miss[0][0] == round_half_away(q)


def test_force_fallback_env(monkeypatch):
    import importlib

    monkeypatch.setenv("BOUNDARYMAP_PURE_PYTHON", "1")
    mod = importlib.reload(_kernels)
    try:
        assert mod.BACKEND_NAME == "fallback"
    finally:
        monkeypatch.delenv("BOUNDARYMAP_PURE_PYTHON")
        importlib.reload(_kernels)
