import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from boundarymap.core import (
    InvalidInputError,
    OccState,
    ProbParams,
    ProjectionAxis,
    clamp_logodds,
    logodds_to_prob,
    prob_to_logodds,
    round_half_away,
    round_half_away_array,
    state_from_logodds,
    state_from_logodds_f32,
    states_from_logodds_array,
    voxel_center,
    world_to_voxel,
    world_to_voxel_array,
)


def default_params(**kw):
    return ProbParams.from_probabilities(resolution=kw.pop("resolution", 0.1),
                                         sensor_range=kw.pop("sensor_range", 10.0), **kw)


class TestWorldToVoxel:
    def test_direct_rounding(self):
        assert world_to_voxel((0.26, -0.31, 0.0), 0.1) == (3, -3, 0)

    def test_zero(self):
        assert world_to_voxel((0.0, 0.0, 0.0), 0.7) == (0, 0, 0)

    def test_ties_away_from_zero(self):
        # 0.05/0.1 and 0.15/0.1 are exact halves in real arithmetic
        assert world_to_voxel((0.05, -0.05, 0.15), 0.1) == (1, -1, 2)

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidInputError):
            world_to_voxel((float("nan"), 0.0, 0.0), 0.1)
        with pytest.raises(InvalidInputError):
            world_to_voxel((0.0, float("inf"), 0.0), 0.1)
        with pytest.raises(InvalidInputError):
            world_to_voxel_array(np.array([[0.0, 0.0, float("nan")]]), 0.1)

    def test_bad_resolution_rejected(self):
        with pytest.raises(InvalidInputError):
            world_to_voxel((0.0, 0.0, 0.0), 0.0)
        with pytest.raises(InvalidInputError):
            world_to_voxel((0.0, 0.0, 0.0), -0.1)

    def test_array_matches_scalar(self):
        rng = np.random.default_rng(0)
        pts = rng.uniform(-50, 50, size=(500, 3))
        d = 0.2
        arr = world_to_voxel_array(pts, d)
        for p, v in zip(pts, arr):
            assert tuple(v) == tuple(world_to_voxel(p, d))

    @given(
        st.tuples(
            st.integers(-10_000, 10_000),
            st.integers(-10_000, 10_000),
            st.integers(-10_000, 10_000),
        ),
        st.sampled_from([0.05, 0.1, 0.2, 0.25, 0.4, 1.0]),
    )
    def test_center_round_trip(self, vox, d):
        assert world_to_voxel(voxel_center(vox, d), d) == vox


class TestRounding:
    @pytest.mark.parametrize(
        "q,expected",
        [
            (0.5, 1), (-0.5, -1), (1.5, 2), (-1.5, -2), (2.5, 3), (-2.5, -3),
            (0.49, 0), (0.51, 1), (-0.49, 0), (2.0, 2), (-2.0, -2), (0.0, 0),
        ],
    )
    def test_scalar(self, q, expected):
        assert round_half_away(q) == expected

    @given(st.floats(-1e6, 1e6))
    def test_array_matches_scalar(self, q):
        assert round_half_away_array(np.array([q]))[0] == round_half_away(q)


class TestLogOdds:
    def test_half_maps_to_zero(self):
        assert prob_to_logodds(0.5) == 0.0

    def test_hit_value(self):
        assert prob_to_logodds(0.8) == pytest.approx(1.3863, abs=1e-4)
        assert prob_to_logodds(0.8) == pytest.approx(math.log(4.0), abs=1e-12)

    def test_miss_value(self):
        assert prob_to_logodds(0.48) == pytest.approx(-0.0800, abs=1e-4)

    def test_domain(self):
        for bad in (0.0, 1.0, -0.2, 1.3):
            with pytest.raises(InvalidInputError):
                prob_to_logodds(bad)

    @given(st.floats(0.01, 0.99))
    def test_round_trip(self, p):
        assert abs(logodds_to_prob(prob_to_logodds(p)) - p) < 1e-12


class TestClamp:
    def test_upper(self):
        params = default_params()
        assert clamp_logodds(5.0, params) == pytest.approx(3.4761, abs=1e-4)
        assert clamp_logodds(5.0, params) == params.l_max

    def test_interior_unchanged(self):
        assert clamp_logodds(0.0, default_params()) == 0.0

    def test_lower(self):
        params = default_params()
        assert clamp_logodds(-9.0, params) == pytest.approx(-2.9444, abs=1e-4)
        assert clamp_logodds(-9.0, params) == params.l_min

    @given(st.floats(-50, 50))
    def test_idempotent(self, l):
        params = default_params()
        once = clamp_logodds(l, params)
        assert clamp_logodds(once, params) == once


class TestStateThresholds:
    def test_free(self):
        params = default_params()
        assert params.l_free == pytest.approx(-1.3863, abs=1e-4)
        assert state_from_logodds(-2.0, params) == OccState.FREE

    def test_fresh_is_unknown(self):
        assert state_from_logodds(0.0, default_params()) == OccState.UNKNOWN

    def test_occupied_boundary_inclusive(self):
        params = default_params()
        assert state_from_logodds(params.l_occ, params) == OccState.OCCUPIED
        assert state_from_logodds(params.l_free, params) == OccState.FREE

    def test_f32_threshold_consistency(self):
        # a grid slot assigned exactly the float32 threshold must classify
        params = default_params()
        assert state_from_logodds_f32(np.float32(params.l_free), params) == OccState.FREE
        assert state_from_logodds_f32(np.float32(params.l_occ), params) == OccState.OCCUPIED
        arr = np.array([params.l_free, params.l_occ, 0.0], dtype=np.float32)
        states = states_from_logodds_array(arr, params)
        assert list(states) == [
            int(OccState.FREE),
            int(OccState.OCCUPIED),
            int(OccState.UNKNOWN),
        ]

    @given(st.floats(-6, 6))
    def test_monotone_partition(self, l):
        params = default_params()
        state = state_from_logodds(l, params)
        if l <= params.l_free:
            assert state == OccState.FREE
        elif l >= params.l_occ:
            assert state == OccState.OCCUPIED
        else:
            assert state == OccState.UNKNOWN


class TestProbParams:
    def test_invariant_violations(self):
        with pytest.raises(InvalidInputError):
            ProbParams.from_probabilities(p_free=0.9)  # l_free must be negative
        with pytest.raises(InvalidInputError):
            ProbParams.from_probabilities(p_miss=0.6)  # miss must lower odds
        with pytest.raises(InvalidInputError):
            ProbParams.from_probabilities(resolution=-1.0)
        with pytest.raises(InvalidInputError):
            ProbParams.from_probabilities(sensor_range=0.0)
        with pytest.raises(InvalidInputError):
            ProbParams.from_probabilities(p_min=0.3, p_free=0.2)  # l_min > l_free


class TestProjectionAxis:
    @pytest.mark.parametrize("axis", list(ProjectionAxis))
    def test_permutation_round_trip(self, axis):
        triple = (1.0, 2.0, 3.0)
        assert axis.to_world(axis.to_internal(triple)) == triple
        arr = np.arange(12.0).reshape(4, 3)
        assert np.array_equal(axis.to_world(axis.to_internal(arr)), arr)

    def test_w_is_projection_axis(self):
        # the third internal component must be the projected world axis
        assert ProjectionAxis.X.to_internal((7.0, 8.0, 9.0))[2] == 7.0
        assert ProjectionAxis.Y.to_internal((7.0, 8.0, 9.0))[2] == 8.0
        assert ProjectionAxis.Z.to_internal((7.0, 8.0, 9.0))[2] == 9.0

    def test_from_name(self):
        assert ProjectionAxis.from_name("z") == ProjectionAxis.Z
        with pytest.raises(InvalidInputError):
            ProjectionAxis.from_name("q")
