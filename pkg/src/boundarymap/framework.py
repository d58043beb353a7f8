"""Global-local mapping framework.

Per scan: ray casting integrates the scan into the robot-centric local grid.
When the vehicle's voxel moves by at least the slide threshold on any axis,
the local extent recenters: the slide-out region is synchronized into the
global boundary map (incremental add/remove of boundary voxels driven by the
difference logger), its slots are reset, and the slide-in region is
reconstructed from the global map and fused back into the local grid. The
ordering is load-bearing: slide-out data must be read from the local grid
before its slots are reused by the slide-in region.

Queries are region-based: voxels inside the local extent read the local grid
directly; all others search the global map along the projection axis in a
direction that cannot pass through the local extent, so stale in-footprint
global entries are never visited.

``map_update`` is exclusive; queries may run concurrently between updates
(external readers-writer discipline).
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .boundary import W_MINUS, W_PLUS, BoundaryGrid2D, BoundaryType
from .core import (
    InvalidInputError,
    LogicError,
    OccState,
    ProbParams,
    ProjectionAxis,
    world_to_voxel,
    world_to_voxel_array,
)
from .localgrid import Box, LocalGrid, compute_slide_regions

_NEIGHBOR_OFFSETS = np.array(
    [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)],
    dtype=np.int64,
)


def compute_boundary_voxel_status(n, lookup) -> tuple[bool, BoundaryType | None]:
    """Boundary classification of one voxel given a state accessor.

    ``lookup(voxel) -> OccState`` must resolve ``n`` and its six neighbors.
    Occupied voxels are always boundary (exterior-occupied); free voxels are
    boundary (interior) iff some 6-neighbor is not free; unknown voxels are
    boundary (exterior-unknown) iff some 6-neighbor is free.
    """
    own = lookup(n)
    if own == OccState.OCCUPIED:
        return True, BoundaryType.EXTERIOR_OCCUPIED
    nbr_states = [
        lookup((n[0] + du, n[1] + dv, n[2] + dw)) for du, dv, dw in _NEIGHBOR_OFFSETS
    ]
    if own == OccState.FREE:
        if any(s != OccState.FREE for s in nbr_states):
            return True, BoundaryType.INTERIOR
        return False, None
    if any(s == OccState.FREE for s in nbr_states):
        return True, BoundaryType.EXTERIOR_UNKNOWN
    return False, None


@dataclass
class UpdateStats:
    """Per-update timing split and counters (one Alg-phase each)."""

    raycast_s: float = 0.0
    boundary_update_s: float = 0.0
    localgrid_update_s: float = 0.0
    slid: bool = False
    skipped_points: int = 0
    constructed_free: int = 0
    constructed_occupied: int = 0


@dataclass
class ConstructResult:
    free: np.ndarray
    occupied: np.ndarray


class MappingFramework:
    def __init__(
        self,
        params: ProbParams,
        axis: ProjectionAxis = ProjectionAxis.Z,
        local_dims=(40, 40, 20),
        slide_threshold: int = 1,
        table_size: int = 1 << 10,
        track_provenance: bool = False,
    ):
        if slide_threshold < 1:
            raise InvalidInputError(f"slide threshold must be >= 1 voxel, got {slide_threshold}")
        self.params = params
        self.axis = axis
        # local_dims are given in world axes; the grid lives in internal axes.
        internal_dims = axis.to_internal(tuple(int(x) for x in local_dims))
        self.local = LocalGrid(internal_dims, params)
        self.global_map = BoundaryGrid2D(table_size=table_size)
        self.slide_threshold = int(slide_threshold)
        self.local_active = False  # becomes True on the first map_update
        self.kernel_backend = None  # None selects the package-wide default
        self.track_provenance = track_provenance
        self.slid_out: set[tuple[int, int, int]] = set()
        self.reentered: set[tuple[int, int, int]] = set()
        self._n_updates = 0

    # ------------------------------------------------------------------
    # update path

    def map_update(self, pose, scan_points) -> UpdateStats:
        """Integrate one scan taken from ``pose`` (world-frame meters).

        Ray casting runs first, then a slide synchronizes the regions the
        recentring moves out of and into the local extent. If the pose voxel
        has left the current extent entirely (a jump larger than the local
        map, which regular slide-threshold operation never produces), the
        slide runs before ray casting instead; the slide-out still reads
        local data untouched by the pending scan, and the scan then lands in
        the recentered extent.
        """
        pose = np.asarray(pose, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(pose)):
            raise InvalidInputError("non-finite pose")
        points = np.asarray(scan_points, dtype=np.float64).reshape(-1, 3)
        pose_i = np.asarray(self.axis.to_internal(pose))
        points_i = self.axis.to_internal(points) if points.size else points

        pose_vox = world_to_voxel(pose_i, self.params.resolution)
        if not self.local_active:
            self.local.set_origin(pose_vox)
            self.local_active = True

        stats = UpdateStats()
        if not self.local.extent().contains(pose_vox):
            self._slide_to(pose_vox, stats)

        t0 = time.perf_counter()
        scan_stats = self.local.raycast_scan(pose_i, points_i, kernel_backend=self.kernel_backend)
        stats.raycast_s = time.perf_counter() - t0
        stats.skipped_points = scan_stats["skipped_points"]

        origin = self.local.origin
        displacement = max(abs(pose_vox[a] - origin[a]) for a in range(3))
        if displacement >= self.slide_threshold:
            self._slide_to(pose_vox, stats)
        self._n_updates += 1
        return stats

    def _slide_to(self, pose_vox, stats: UpdateStats) -> None:
        origin = self.local.origin
        regions = compute_slide_regions(origin, pose_vox, self.local.dims)
        old_extent = self.local.extent()

        t0 = time.perf_counter()
        self._incremental_boundary_update(regions.s_out, old_extent)
        stats.boundary_update_s += time.perf_counter() - t0

        self.local.set_origin(pose_vox)

        t0 = time.perf_counter()
        if self.track_provenance:
            self._record_reentry(regions.s_in)
        for box in regions.s_in:
            self.local.reset_region(box)
        n_free, n_occ = self._local_grid_update(regions.s_in, old_extent)
        stats.localgrid_update_s += time.perf_counter() - t0
        stats.constructed_free += n_free
        stats.constructed_occupied += n_occ
        stats.slid = True

    def finalize(self) -> None:
        """Force full synchronization: slide the whole extent out.

        Afterwards the global map is spatially complete and queries no longer
        consult the local grid. Replays call this before exporting.
        """
        if not self.local_active:
            return
        extent = self.local.extent()
        if self.track_provenance:
            self.slid_out.update(map(tuple, extent.voxel_coords().tolist()))
        self._incremental_boundary_update([extent], extent)
        self.local.reset_all()
        self.local_active = False

    def _record_reentry(self, s_in_boxes) -> None:
        for box in s_in_boxes:
            for v in map(tuple, box.voxel_coords().tolist()):
                if v in self.slid_out:
                    self.reentered.add(v)

    # ------------------------------------------------------------------
    # slide-out: incremental boundary map update

    def _incremental_boundary_update(self, s_out_boxes, pre_extent: Box) -> None:
        """Synchronize the slide-out region into the global boundary map.

        Voxels recorded by the difference logger inside the slide-out region,
        together with their 6-neighbors, form the candidate set U; any stored
        boundary voxel in U may have changed status, every voxel outside U
        keeps its status. Classification runs against the post-sync dense
        state before any mutation, then stored U entries are dropped and the
        newly classified boundary voxels inserted (columns stay sorted).
        """
        if not s_out_boxes:
            return
        if self.track_provenance:
            for box in s_out_boxes:
                self.slid_out.update(map(tuple, box.voxel_coords().tolist()))

        if not self.local.diff:
            return
        diff_coords = np.array(sorted(self.local.diff), dtype=np.int64)
        in_sout = np.zeros(len(diff_coords), dtype=bool)
        for box in s_out_boxes:
            in_sout |= box.contains_array(diff_coords)
        if not in_sout.any():
            return
        changed = diff_coords[in_sout]
        self.local.diff.difference_update(map(tuple, changed.tolist()))

        with_neighbors = np.concatenate(
            [changed] + [changed + off for off in _NEIGHBOR_OFFSETS]
        )
        coords = np.unique(with_neighbors, axis=0)
        states = self._states_for_sync(coords, pre_extent, s_out_boxes)
        nbr_states = np.empty((len(coords), 6), dtype=np.uint8)
        for i, off in enumerate(_NEIGHBOR_OFFSETS):
            nbr_states[:, i] = self._states_for_sync(coords + off, pre_extent, s_out_boxes)

        occ = states == int(OccState.OCCUPIED)
        free = states == int(OccState.FREE)
        ukn = states == int(OccState.UNKNOWN)
        any_nonfree = np.any(nbr_states != int(OccState.FREE), axis=1)
        any_free = np.any(nbr_states == int(OccState.FREE), axis=1)
        types = np.zeros(len(coords), dtype=np.uint8)
        types[occ] = int(BoundaryType.EXTERIOR_OCCUPIED)
        types[free & any_nonfree] = int(BoundaryType.INTERIOR)
        types[ukn & any_free] = int(BoundaryType.EXTERIOR_UNKNOWN)
        is_boundary = types != 0

        # Group U by column; remove outdated entries, then add new ones.
        cell_change = np.any(coords[1:, :2] != coords[:-1, :2], axis=1)
        starts = np.concatenate([[0], np.nonzero(cell_change)[0] + 1, [len(coords)]])
        for i in range(len(starts) - 1):
            a, b = starts[i], starts[i + 1]
            u, v = int(coords[a, 0]), int(coords[a, 1])
            self.global_map.discard_bulk(u, v, coords[a:b, 2])
            keep = is_boundary[a:b]
            if keep.any():
                self.global_map.insert_bulk(u, v, coords[a:b, 2][keep], types[a:b][keep])

    def _states_for_sync(self, coords: np.ndarray, pre_extent: Box, s_out_boxes) -> np.ndarray:
        """Post-sync dense state of ``coords`` during a slide-out.

        Slide-out voxels read the (fresh) local grid since that is what is
        being synchronized; other in-extent voxels read the synchronized
        state so the global map stays a consistent snapshot; voxels outside
        the extent query the global map away from the extent.
        """
        out = np.empty(len(coords), dtype=np.uint8)
        inside = pre_extent.contains_array(coords)
        if inside.any():
            in_coords = coords[inside]
            slots = self.local.slot_array(in_coords)
            fresh = self.local.states_at_slots(slots)
            synced = self.local.synced.get(slots)
            in_sout = np.zeros(len(in_coords), dtype=bool)
            for box in s_out_boxes:
                in_sout |= box.contains_array(in_coords)
            out[inside] = np.where(in_sout, fresh, synced)
        outside_idx = np.nonzero(~inside)[0]
        for i in outside_idx:
            out[i] = int(self._query_global_away_from(tuple(coords[i]), pre_extent))
        return out

    # ------------------------------------------------------------------
    # slide-in: local occupancy grid update

    def _local_grid_update(self, s_in_boxes, old_extent: Box) -> tuple[int, int]:
        """Reconstruct the slide-in region from the global map and fuse it."""
        if not s_in_boxes:
            return 0, 0
        segments: dict[tuple[int, int], tuple[int, int]] = {}
        for box in s_in_boxes:
            for u in range(box.lo[0], box.hi[0]):
                for v in range(box.lo[1], box.hi[1]):
                    w_lo, w_hi = box.lo[2], box.hi[2] - 1
                    seg = segments.get((u, v))
                    if seg is None:
                        segments[(u, v)] = (w_lo, w_hi)
                    else:
                        segments[(u, v)] = (min(seg[0], w_lo), max(seg[1], w_hi))

        moved_down = self.local.extent().lo[2] < old_extent.lo[2]
        old_fp_lo, old_fp_hi = old_extent.lo[:2], old_extent.hi[:2]

        free_list: list[tuple[int, int, int]] = []
        occ_list: list[tuple[int, int, int]] = []
        for (u, v), (w_lo, w_hi) in segments.items():
            in_old_footprint = (
                old_fp_lo[0] <= u < old_fp_hi[0] and old_fp_lo[1] <= v < old_fp_hi[1]
            )
            direction = W_MINUS if (moved_down and in_old_footprint) else W_PLUS
            result = construct_column_segment(
                self.global_map, u, v, w_lo, w_hi, direction
            )
            free_list.extend(result.free.tolist())
            occ_list.extend(result.occupied.tolist())

        free = np.array(free_list, dtype=np.int64).reshape(-1, 3)
        occ = np.array(occ_list, dtype=np.int64).reshape(-1, 3)
        coords = np.concatenate([free, occ])
        states = np.concatenate(
            [
                np.full(len(free), int(OccState.FREE), dtype=np.uint8),
                np.full(len(occ), int(OccState.OCCUPIED), dtype=np.uint8),
            ]
        )
        self.local.fuse_states(coords, states)
        return len(free), len(occ)

    # ------------------------------------------------------------------
    # queries

    def _query_global_away_from(self, q, extent: Box) -> OccState:
        """Global-map query with a search direction avoiding ``extent``."""
        in_footprint = (
            extent.lo[0] <= q[0] < extent.hi[0] and extent.lo[1] <= q[1] < extent.hi[1]
        )
        if not in_footprint:
            direction = W_PLUS
        elif q[2] >= extent.hi[2]:
            direction = W_PLUS
        elif q[2] < extent.lo[2]:
            direction = W_MINUS
        else:
            raise LogicError(f"query voxel {tuple(q)} lies inside the local extent")
        return self.global_map.determine_occupancy(q, direction)

    def query_voxel(self, v) -> OccState:
        """Occupancy state of an internal-frame voxel index."""
        if self.local_active:
            extent = self.local.extent()
            if extent.contains(v):
                return self.local.state_at(v)
            return self._query_global_away_from(v, extent)
        return self.global_map.determine_occupancy(tuple(v), W_PLUS)

    def query_voxels(self, coords: np.ndarray) -> np.ndarray:
        """Vectorized `query_voxel` over (N, 3) internal-frame voxel coords."""
        coords = np.asarray(coords, dtype=np.int64).reshape(-1, 3)
        out = np.empty(len(coords), dtype=np.uint8)
        if self.local_active:
            extent = self.local.extent()
            inside = extent.contains_array(coords)
            if inside.any():
                slots = self.local.slot_array(coords[inside])
                out[inside] = self.local.states_at_slots(slots)
            for i in np.nonzero(~inside)[0]:
                out[i] = int(self._query_global_away_from(tuple(coords[i]), extent))
        else:
            for i in range(len(coords)):
                out[i] = int(self.global_map.determine_occupancy(tuple(coords[i]), W_PLUS))
        return out

    def query_world_voxel(self, v_world) -> OccState:
        """Occupancy of a world-frame voxel index."""
        return self.query_voxel(self.axis.to_internal(tuple(int(x) for x in v_world)))

    def query_world(self, p) -> OccState:
        """Occupancy of a world point in meters."""
        v = world_to_voxel(p, self.params.resolution)
        return self.query_world_voxel(v)

    def query_world_points(self, points: np.ndarray) -> np.ndarray:
        voxels = world_to_voxel_array(points, self.params.resolution)
        return self.query_voxels(self.axis.to_internal(voxels))

    def frontier_voxels(self) -> np.ndarray:
        """World-frame voxel indices of the stored free/unknown interface."""
        internal = np.array(self.global_map.list_frontier_voxels(), dtype=np.int64)
        if not internal.size:
            return internal.reshape(0, 3)
        return self.axis.to_world(internal)


def construct_column_segment(
    grid: BoundaryGrid2D, u: int, v: int, w_lo: int, w_hi: int, direction: int
) -> ConstructResult:
    """Reconstruct the free and occupied voxels of one column segment.

    Implements the slide-in loading rule for the segment ``w in [w_lo, w_hi]``
    of column (u, v): stored boundary voxels inside the segment yield their
    own states; from each interior voxel the segment is swept in both
    directions, marking voxels free until another stored voxel or the
    segment edge; a segment without stored voxels has a uniform state, read
    by querying its lowest voxel along ``direction``. Occupied voxels can
    only come from stored exterior-occupied entries.
    """
    col = grid.find_column(u, v)
    entries = col.slice_range(w_lo, w_hi) if col is not None else []
    free_ws: list[int] = []
    occ_ws: list[int] = []
    if not entries:
        state = grid.determine_occupancy((u, v, w_lo), direction)
        if state == OccState.FREE:
            free_ws.extend(range(w_lo, w_hi + 1))
        elif state == OccState.OCCUPIED:
            raise LogicError(
                f"segment ({u},{v},[{w_lo},{w_hi}]) with no stored voxels "
                "reported occupied; occupied voxels must be stored"
            )
    else:
        stored_ws = [w for w, _ in entries]
        for idx, (w, t) in enumerate(entries):
            if t == BoundaryType.INTERIOR:
                free_ws.append(w)
                upper = stored_ws[idx + 1] - 1 if idx + 1 < len(stored_ws) else w_hi
                free_ws.extend(range(w + 1, upper + 1))
                lower = stored_ws[idx - 1] + 1 if idx > 0 else w_lo
                free_ws.extend(range(lower, w))
            elif t == BoundaryType.EXTERIOR_OCCUPIED:
                occ_ws.append(w)
    free = np.array([(u, v, w) for w in sorted(set(free_ws))], dtype=np.int64).reshape(-1, 3)
    occ = np.array([(u, v, w) for w in occ_ws], dtype=np.int64).reshape(-1, 3)
    return ConstructResult(free=free, occupied=occ)
