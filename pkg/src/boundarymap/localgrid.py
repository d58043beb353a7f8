"""Robot-centric fixed-size log-odds grid with modular zero-copy addressing.

The grid holds ``nu * nv * nw`` float32 log-odds values in one flat array.
A voxel's slot is ``((u mod nu) * nv + (v mod nv)) * nw + (w mod nw)`` with
non-negative modulo, so a voxel that stays inside the extent across a slide
keeps its slot and sliding never copies data; only the slots of the slide-out
region are reset and reused for the slide-in region.

Alongside the log-odds array the grid keeps:

* ``synced``: 2 bits per voxel recording the discrete state last synchronized
  with the global map (fresh voxels are Unknown, code 0);
* ``diff``: the set of in-extent voxels (absolute coordinates) whose current
  discrete state differs from ``synced``, maintained exactly after every
  scan integration, fuse, and reset.

Mutation is single-threaded; the arrays may be read concurrently only
between update calls.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import (
    InvalidInputError,
    LogicError,
    OccState,
    ProbParams,
    states_from_logodds_array,
    world_to_voxel,
)


@dataclass(frozen=True)
class Box:
    """Axis-aligned voxel box, inclusive lo, exclusive hi."""

    lo: tuple[int, int, int]
    hi: tuple[int, int, int]

    def is_empty(self) -> bool:
        return any(self.hi[a] <= self.lo[a] for a in range(3))

    def volume(self) -> int:
        if self.is_empty():
            return 0
        return (
            (self.hi[0] - self.lo[0])
            * (self.hi[1] - self.lo[1])
            * (self.hi[2] - self.lo[2])
        )

    def contains(self, v) -> bool:
        return all(self.lo[a] <= v[a] < self.hi[a] for a in range(3))

    def contains_array(self, coords: np.ndarray) -> np.ndarray:
        coords = np.asarray(coords)
        return np.all((coords >= self.lo) & (coords < self.hi), axis=-1)

    def voxel_coords(self) -> np.ndarray:
        """All voxels of the box as an (volume, 3) int64 array."""
        if self.is_empty():
            return np.empty((0, 3), dtype=np.int64)
        u = np.arange(self.lo[0], self.hi[0], dtype=np.int64)
        v = np.arange(self.lo[1], self.hi[1], dtype=np.int64)
        w = np.arange(self.lo[2], self.hi[2], dtype=np.int64)
        gu, gv, gw = np.meshgrid(u, v, w, indexing="ij")
        return np.stack([gu.ravel(), gv.ravel(), gw.ravel()], axis=1)

    def intersect(self, other: "Box") -> "Box":
        lo = tuple(max(self.lo[a], other.lo[a]) for a in range(3))
        hi = tuple(min(self.hi[a], other.hi[a]) for a in range(3))
        return Box(lo, hi)


def box_difference(a: Box, b: Box) -> list[Box]:
    """Disjoint boxes covering ``a \\ b`` (at most two slabs per axis)."""
    out: list[Box] = []
    cur = a
    for ax in range(3):
        if cur.is_empty():
            return out
        if b.lo[ax] > cur.lo[ax]:
            hi = list(cur.hi)
            hi[ax] = min(b.lo[ax], cur.hi[ax])
            slab = Box(cur.lo, tuple(hi))
            if not slab.is_empty():
                out.append(slab)
            lo = list(cur.lo)
            lo[ax] = min(b.lo[ax], cur.hi[ax])
            cur = Box(tuple(lo), cur.hi)
        if b.hi[ax] < cur.hi[ax]:
            lo = list(cur.lo)
            lo[ax] = max(b.hi[ax], cur.lo[ax])
            slab = Box(tuple(lo), cur.hi)
            if not slab.is_empty():
                out.append(slab)
            hi = list(cur.hi)
            hi[ax] = max(b.hi[ax], cur.lo[ax])
            cur = Box(cur.lo, tuple(hi))
    return out


@dataclass
class SlideRegions:
    """Voxel sets leaving (``s_out``) and entering (``s_in``) the local extent."""

    s_out: list[Box]
    s_in: list[Box]


def extent_for(origin, dims) -> Box:
    """Extent of a grid with the given center voxel; lower corner origin - dims//2."""
    lo = tuple(int(origin[a]) - dims[a] // 2 for a in range(3))
    return Box(lo, tuple(lo[a] + dims[a] for a in range(3)))


def compute_slide_regions(old_origin, new_origin, dims) -> SlideRegions:
    old = extent_for(old_origin, dims)
    new = extent_for(new_origin, dims)
    return SlideRegions(s_out=box_difference(old, new), s_in=box_difference(new, old))


class PackedStateArray:
    """2-bit-per-entry occupancy state array (4 states per byte)."""

    def __init__(self, n: int):
        self._n = n
        self._data = np.zeros((n + 3) // 4, dtype=np.uint8)

    def get(self, idx: np.ndarray) -> np.ndarray:
        idx = np.asarray(idx)
        shift = ((idx & 3) << 1).astype(np.uint8)
        return (self._data[idx >> 2] >> shift) & np.uint8(3)

    def set(self, idx: np.ndarray, values: np.ndarray) -> None:
        """Set states at unique indices (duplicate indices are a caller bug)."""
        idx = np.asarray(idx)
        if idx.size == 0:
            return
        byte = idx >> 2
        shift = ((idx & 3) << 1).astype(np.uint8)
        np.bitwise_and.at(self._data, byte, ~(np.uint8(3) << shift))
        np.bitwise_or.at(
            self._data, byte, np.asarray(values, dtype=np.uint8) << shift
        )

    def get_scalar(self, i: int) -> int:
        return int((self._data[i >> 2] >> ((i & 3) << 1)) & 3)

    def fill_unknown(self) -> None:
        self._data[:] = 0

    def nbytes(self) -> int:
        return self._data.nbytes


def scan_deltas(slots_miss, slots_hit, params: ProbParams):
    """Aggregate one scan's per-voxel update (counts before applying).

    Returns ``(slots, delta)`` where each touched slot appears once and
    ``delta = n_hit * l_hit + n_miss * l_miss`` for that slot.
    """
    slots = np.concatenate([slots_miss, slots_hit])
    if slots.size == 0:
        return slots, np.empty(0, dtype=np.float64)
    weights = np.concatenate(
        [
            np.full(len(slots_miss), params.l_miss, dtype=np.float64),
            np.full(len(slots_hit), params.l_hit, dtype=np.float64),
        ]
    )
    uniq, inverse = np.unique(slots, return_inverse=True)
    delta = np.bincount(inverse, weights=weights, minlength=len(uniq))
    return uniq, delta


def apply_deltas_clamped(logodds: np.ndarray, slots: np.ndarray, delta: np.ndarray,
                         params: ProbParams) -> tuple[np.ndarray, np.ndarray]:
    """Apply clamped log-odds increments in float64, store float32.

    Returns the (pre, post) float32 values at ``slots``. Shared by the local
    grid and the dense reference grid so both follow identical arithmetic.
    """
    pre = logodds[slots]
    post = np.clip(pre.astype(np.float64) + delta, params.l_min, params.l_max)
    post32 = post.astype(np.float32)
    logodds[slots] = post32
    return pre, post32


class LocalGrid:
    def __init__(self, dims, params: ProbParams, origin=(0, 0, 0)):
        dims = tuple(int(x) for x in dims)
        if any(x <= 0 for x in dims):
            raise InvalidInputError(f"grid dims must be positive, got {dims}")
        self.dims = dims
        self.params = params
        self._origin = tuple(int(x) for x in origin)
        n = dims[0] * dims[1] * dims[2]
        self.logodds = np.zeros(n, dtype=np.float32)
        self.synced = PackedStateArray(n)
        self.diff: set[tuple[int, int, int]] = set()

    @property
    def origin(self) -> tuple[int, int, int]:
        return self._origin

    @property
    def n_slots(self) -> int:
        return len(self.logodds)

    def extent(self) -> Box:
        return extent_for(self._origin, self.dims)

    def set_origin(self, origin) -> None:
        self._origin = tuple(int(x) for x in origin)

    def slot_array(self, coords: np.ndarray) -> np.ndarray:
        """Slots for (N, 3) absolute voxel coords; callers ensure in-extent."""
        coords = np.asarray(coords, dtype=np.int64)
        nu, nv, nw = self.dims
        return (
            np.remainder(coords[..., 0], nu) * nv + np.remainder(coords[..., 1], nv)
        ) * nw + np.remainder(coords[..., 2], nw)

    def address(self, v) -> int:
        if not self.extent().contains(v):
            raise LogicError(f"voxel {tuple(v)} outside local extent {self.extent()}")
        nu, nv, nw = self.dims
        return ((v[0] % nu) * nv + (v[1] % nv)) * nw + (v[2] % nw)

    def coords_of_slots(self, slots: np.ndarray) -> np.ndarray:
        """Absolute coords of slots under the current extent (slot inverse)."""
        nu, nv, nw = self.dims
        lo = self.extent().lo
        a, rem = np.divmod(np.asarray(slots, dtype=np.int64), nv * nw)
        b, c = np.divmod(rem, nw)
        u = lo[0] + np.remainder(a - lo[0], nu)
        v = lo[1] + np.remainder(b - lo[1], nv)
        w = lo[2] + np.remainder(c - lo[2], nw)
        return np.stack([u, v, w], axis=-1)

    def state_at(self, v) -> OccState:
        val = self.logodds[self.address(v)]
        if val <= self.params.l_free_f32:
            return OccState.FREE
        if val >= self.params.l_occ_f32:
            return OccState.OCCUPIED
        return OccState.UNKNOWN

    def states_at_slots(self, slots: np.ndarray) -> np.ndarray:
        return states_from_logodds_array(self.logodds[slots], self.params)

    def _update_diff(self, coords: np.ndarray, post_states: np.ndarray,
                     synced_states: np.ndarray) -> None:
        mismatch = post_states != synced_states
        coords = np.asarray(coords)
        self.diff.update(map(tuple, coords[mismatch].tolist()))
        self.diff.difference_update(map(tuple, coords[~mismatch].tolist()))

    def raycast_scan(self, sensor_origin, points, kernel_backend=None) -> dict:
        """Integrate one scan via ray casting (Eq. counts-then-apply update).

        ``sensor_origin`` must be inside the current extent. Per scan, each
        voxel's aggregate is applied once and clamped; traversal outside the
        extent is clipped. Returns per-scan statistics.
        """
        params = self.params
        origin_vox = world_to_voxel(sensor_origin, params.resolution)
        ext = self.extent()
        if not ext.contains(origin_vox):
            raise InvalidInputError(
                f"sensor origin voxel {tuple(origin_vox)} outside local extent {ext}"
            )
        clip_hi = tuple(h - 1 for h in ext.hi)
        miss, hit, skipped = _kernels.raycast(
            sensor_origin, points, params.resolution, params.sensor_range,
            ext.lo, clip_hi, backend=kernel_backend,
        )
        slots_miss = self.slot_array(miss)
        slots_hit = self.slot_array(hit)
        slots, delta = scan_deltas(slots_miss, slots_hit, params)
        if slots.size:
            _, post = apply_deltas_clamped(self.logodds, slots, delta, params)
            post_states = states_from_logodds_array(post, params)
            self._update_diff(self.coords_of_slots(slots), post_states, self.synced.get(slots))
        return {
            "skipped_points": skipped,
            "touched_voxels": int(slots.size),
            "misses": int(len(miss)),
            "hits": int(len(hit)),
        }

    def fuse_states(self, coords: np.ndarray, states: np.ndarray) -> None:
        """Fuse constructed discrete states into (previously reset) slots.

        Adds ``l_free`` or ``l_occ`` to the stored log-odds, clamps, marks the
        constructed state as synchronized, and re-checks the difference set
        against the post-fuse state.
        """
        if not len(coords):
            return
        params = self.params
        slots = self.slot_array(coords)
        delta = np.where(
            np.asarray(states) == int(OccState.FREE), params.l_free, params.l_occ
        )
        _, post = apply_deltas_clamped(self.logodds, slots, delta, params)
        self.synced.set(slots, np.asarray(states, dtype=np.uint8))
        post_states = states_from_logodds_array(post, params)
        self._update_diff(np.asarray(coords), post_states, np.asarray(states, dtype=np.uint8))

    def reset_region(self, box: Box) -> None:
        """Return every voxel of ``box`` to the fresh Unknown state."""
        region = box.intersect(self.extent())
        if region.is_empty():
            return
        coords = region.voxel_coords()
        slots = self.slot_array(coords)
        self.logodds[slots] = np.float32(0.0)
        self.synced.set(slots, np.zeros(len(slots), dtype=np.uint8))
        self.diff = {v for v in self.diff if not region.contains(v)}

    def reset_all(self) -> None:
        self.logodds[:] = np.float32(0.0)
        self.synced.fill_unknown()
        self.diff.clear()

    def load_discrete_states(self, coords: np.ndarray, states: np.ndarray) -> None:
        """Bulk-initialize voxels to representative log-odds for given states.

        Test-and-tooling entry point: assigns ``l_free`` / ``l_occ`` / 0 and
        maintains the difference set exactly (synchronized state stays
        whatever it was, normally Unknown).
        """
        coords = np.asarray(coords, dtype=np.int64).reshape(-1, 3)
        states = np.asarray(states, dtype=np.uint8).reshape(-1)
        if not coords.size:
            return
        params = self.params
        values = np.zeros(len(states), dtype=np.float32)
        values[states == int(OccState.FREE)] = np.float32(params.l_free)
        values[states == int(OccState.OCCUPIED)] = np.float32(params.l_occ)
        slots = self.slot_array(coords)
        self.logodds[slots] = values
        self._update_diff(coords, states, self.synced.get(slots))

    def recompute_diff(self) -> set[tuple[int, int, int]]:
        """Difference set rebuilt from scratch (test oracle for exactness)."""
        coords = self.extent().voxel_coords()
        slots = self.slot_array(coords)
        states = self.states_at_slots(slots)
        synced = self.synced.get(slots)
        bad = states != synced
        return {tuple(row) for row in coords[bad].tolist()}
