"""Dense full-environment reference grid and equivalence checkers.

The reference grid applies exactly the same per-scan arithmetic as the local
grid (shared helpers from ``localgrid``), just over a fixed extent covering
the whole environment, and exposes brute-force boundary classification for
use as ground truth in tests.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import _kernels
from .boundary import BoundaryType
from .core import OccState, ProbParams, states_from_logodds_array
from .localgrid import Box, apply_deltas_clamped, scan_deltas


class OracleGrid:
    """Uniform dense grid over a fixed extent; the baseline map."""

    def __init__(self, extent: Box, params: ProbParams):
        self.extent = extent
        self.params = params
        self.shape = tuple(extent.hi[a] - extent.lo[a] for a in range(3))
        self.logodds = np.zeros(
            self.shape[0] * self.shape[1] * self.shape[2], dtype=np.float32
        )

    def slot_array(self, coords: np.ndarray) -> np.ndarray:
        coords = np.asarray(coords, dtype=np.int64)
        lo = self.extent.lo
        _, ny, nz = self.shape
        return (
            (coords[..., 0] - lo[0]) * ny + (coords[..., 1] - lo[1])
        ) * nz + (coords[..., 2] - lo[2])

    def update(self, sensor_origin, points, kernel_backend=None) -> dict:
        """Integrate one scan; same contract as ``LocalGrid.raycast_scan``."""
        params = self.params
        clip_hi = tuple(h - 1 for h in self.extent.hi)
        miss, hit, skipped = _kernels.raycast(
            sensor_origin, points, params.resolution, params.sensor_range,
            self.extent.lo, clip_hi, backend=kernel_backend,
        )
        slots, delta = scan_deltas(
            self.slot_array(miss), self.slot_array(hit), params
        )
        if slots.size:
            apply_deltas_clamped(self.logodds, slots, delta, params)
        return {"skipped_points": skipped, "touched_voxels": int(slots.size)}

    def states_grid(self) -> np.ndarray:
        """Discrete states of the whole extent as a 3D uint8 array."""
        return states_from_logodds_array(self.logodds, self.params).reshape(self.shape)

    def state_at(self, v) -> OccState:
        if not self.extent.contains(v):
            return OccState.UNKNOWN
        val = self.logodds[self.slot_array(np.asarray(v))]
        if val <= self.params.l_free_f32:
            return OccState.FREE
        if val >= self.params.l_occ_f32:
            return OccState.OCCUPIED
        return OccState.UNKNOWN

    def states_at(self, coords: np.ndarray) -> np.ndarray:
        """States for (N, 3) coords; anything outside the extent is Unknown."""
        coords = np.asarray(coords, dtype=np.int64)
        out = np.zeros(len(coords), dtype=np.uint8)
        inside = self.extent.contains_array(coords)
        if inside.any():
            vals = self.logodds[self.slot_array(coords[inside])]
            out[inside] = states_from_logodds_array(vals, self.params)
        return out

    def known_voxel_count(self) -> int:
        """Voxels whose state is Free or Occupied."""
        states = states_from_logodds_array(self.logodds, self.params)
        return int(np.count_nonzero(states != int(OccState.UNKNOWN)))

    def load_discrete_states(self, coords: np.ndarray, states: np.ndarray) -> None:
        """Bulk-assign representative log-odds (test initializer)."""
        coords = np.asarray(coords, dtype=np.int64).reshape(-1, 3)
        states = np.asarray(states, dtype=np.uint8).reshape(-1)
        params = self.params
        values = np.zeros(len(states), dtype=np.float32)
        values[states == int(OccState.FREE)] = np.float32(params.l_free)
        values[states == int(OccState.OCCUPIED)] = np.float32(params.l_occ)
        self.logodds[self.slot_array(coords)] = values

    def extract_boundary_bruteforce(self) -> tuple[np.ndarray, np.ndarray]:
        """Classify every voxel of the extent literally; outside is Unknown.

        Returns (coords int64[N,3], types uint8[N]) for the boundary voxels.
        """
        coords, types = classify_dense_states(self.states_grid())
        return coords + np.asarray(self.extent.lo, dtype=np.int64), types


def classify_dense_states(states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Boundary classification of a dense 3D state grid (Unknown outside).

    A voxel is exterior-occupied iff occupied; interior iff free with at
    least one non-free 6-neighbor; exterior-unknown iff unknown with at
    least one free 6-neighbor.
    """
    states = np.asarray(states, dtype=np.uint8)
    padded = np.full(
        tuple(s + 2 for s in states.shape), int(OccState.UNKNOWN), dtype=np.uint8
    )
    padded[1:-1, 1:-1, 1:-1] = states
    free = states == int(OccState.FREE)
    occ = states == int(OccState.OCCUPIED)
    ukn = states == int(OccState.UNKNOWN)

    any_nonfree_nbr = np.zeros(states.shape, dtype=bool)
    any_free_nbr = np.zeros(states.shape, dtype=bool)
    for axis in range(3):
        for off in (-1, 1):
            idx = [slice(1, -1)] * 3
            idx[axis] = slice(1 + off, states.shape[axis] + 1 + off)
            nbr = padded[tuple(idx)]
            any_nonfree_nbr |= nbr != int(OccState.FREE)
            any_free_nbr |= nbr == int(OccState.FREE)

    interior = free & any_nonfree_nbr
    ext_unknown = ukn & any_free_nbr

    coords_list = []
    types_list = []
    for mask, t in (
        (interior, BoundaryType.INTERIOR),
        (ext_unknown, BoundaryType.EXTERIOR_UNKNOWN),
        (occ, BoundaryType.EXTERIOR_OCCUPIED),
    ):
        c = np.argwhere(mask)
        coords_list.append(c)
        types_list.append(np.full(len(c), int(t), dtype=np.uint8))
    coords = np.concatenate(coords_list).astype(np.int64)
    types = np.concatenate(types_list)
    order = np.lexsort((coords[:, 2], coords[:, 1], coords[:, 0]))
    return coords[order], types[order]


def mapping_space_voxels(scan_origins: np.ndarray, sensor_range: float,
                         resolution: float) -> np.ndarray:
    """Voxels of the mapping space: the union of per-scan sensing spheres.

    Membership rule: a voxel belongs iff its center lies within
    ``sensor_range`` of at least one scan origin.
    """
    origins = np.asarray(scan_origins, dtype=np.float64).reshape(-1, 3)
    if not len(origins):
        return np.empty((0, 3), dtype=np.int64)
    lo = np.floor((origins.min(axis=0) - sensor_range) / resolution).astype(np.int64) - 1
    hi = np.ceil((origins.max(axis=0) + sensor_range) / resolution).astype(np.int64) + 2
    box = Box(tuple(lo), tuple(hi))
    coords = box.voxel_coords()
    centers = coords.astype(np.float64) * resolution
    tree = cKDTree(origins)
    dist, _ = tree.query(centers, k=1, distance_upper_bound=sensor_range * 1.0001)
    return coords[dist <= sensor_range]


@dataclass
class CompareResult:
    total: int
    matches: int
    mismatches: list = field(default_factory=list)  # (voxel, oracle_state, framework_state)

    @property
    def agreement(self) -> float:
        return self.matches / self.total if self.total else 1.0


def compare_states(oracle: OracleGrid, query_fn, m_voxels: np.ndarray,
                   keep_mismatches: int = 1_000_000) -> CompareResult:
    """Agreement between the reference grid and a query function over ``m_voxels``.

    ``query_fn(coords) -> uint8[N]`` supplies the states under test. An empty
    voxel set compares as full agreement with zero voxels.
    """
    m_voxels = np.asarray(m_voxels, dtype=np.int64).reshape(-1, 3)
    if not len(m_voxels):
        return CompareResult(total=0, matches=0)
    ref = oracle.states_at(m_voxels)
    got = np.asarray(query_fn(m_voxels), dtype=np.uint8)
    bad = ref != got
    mismatches = [
        (tuple(v), OccState(int(r)), OccState(int(g)))
        for v, r, g in zip(
            m_voxels[bad][:keep_mismatches].tolist(), ref[bad], got[bad]
        )
    ]
    return CompareResult(
        total=len(m_voxels),
        matches=int(len(m_voxels) - bad.sum()),
        mismatches=mismatches,
    )


def export_mismatches_csv(path, result: CompareResult) -> None:
    """Dump disagreeing voxels with both states for debugging."""
    with open(path, "w") as f:
        f.write("u,v,w,oracle_state,framework_state\n")
        for (u, v, w), ref, got in result.mismatches:
            f.write(f"{u},{v},{w},{ref.name},{got.name}\n")
