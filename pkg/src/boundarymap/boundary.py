"""Global boundary map: a hashed 2D grid of sorted packed boundary-voxel columns.

Each stored voxel packs into one 32-bit word: bits 31-30 carry the boundary
type (01 interior, 10 exterior-unknown, 11 exterior-occupied, 00 reserved
invalid), bits 29-0 carry the w-coordinate biased by +2^29 so that the masked
low bits are order-isomorphic to the signed coordinate. Columns keep their
words sorted by w, which makes nearest-boundary lookups a binary search.

Grid cells live in a chained hash table with bucket index
``(P * u + v) mod Q`` where P = 1441 and Q is a power of two; the table
rehashes to 2Q when the column count exceeds ``max_load * Q``.

Concurrency: single writer, multiple readers; queries may run concurrently
with each other but callers must exclude them from update phases.
"""
from __future__ import annotations

from array import array
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterator, Optional

import numpy as np

from .core import InvalidInputError, LogicError, OccState

HASH_PRIME = 1441
MASK30 = (1 << 30) - 1
W_BIAS = 1 << 29
W_LIMIT = 1 << 29  # |w| must be strictly below this

W_PLUS = 1
W_MINUS = -1


class BoundaryType(IntEnum):
    INTERIOR = 1
    EXTERIOR_UNKNOWN = 2
    EXTERIOR_OCCUPIED = 3


_TYPE_STATE = {
    BoundaryType.INTERIOR: OccState.FREE,
    BoundaryType.EXTERIOR_UNKNOWN: OccState.UNKNOWN,
    BoundaryType.EXTERIOR_OCCUPIED: OccState.OCCUPIED,
}


def state_of_boundary_type(t: BoundaryType) -> OccState:
    """Occupancy state a boundary voxel of type ``t`` has by definition."""
    return _TYPE_STATE[BoundaryType(t)]


def hash_cell(u: int, v: int, table_size: int) -> int:
    """Bucket index of cell (u, v); negative inputs wrap non-negative."""
    if table_size <= 0:
        raise InvalidInputError(f"table size must be positive, got {table_size}")
    return (HASH_PRIME * u + v) % table_size


def pack(w: int, t: BoundaryType) -> int:
    if not -W_LIMIT < w < W_LIMIT:
        raise InvalidInputError(f"w-coordinate {w} exceeds the 30-bit packed range")
    t = BoundaryType(t)
    return (int(t) << 30) | (w + W_BIAS)


def unpack(word: int) -> tuple[int, BoundaryType]:
    code = word >> 30
    if code == 0:
        raise LogicError(f"packed word {word:#010x} has the reserved invalid type code")
    return (word & MASK30) - W_BIAS, BoundaryType(code)


def pack_array(ws: np.ndarray, types: np.ndarray) -> np.ndarray:
    ws = np.asarray(ws, dtype=np.int64)
    if ws.size and (ws.min() <= -W_LIMIT or ws.max() >= W_LIMIT):
        raise InvalidInputError("w-coordinate exceeds the 30-bit packed range")
    return (
        (np.asarray(types, dtype=np.uint32) << np.uint32(30))
        | (ws + W_BIAS).astype(np.uint32)
    )


class Column:
    """Sorted, duplicate-free stack of packed boundary voxels for one cell."""

    __slots__ = ("u", "v", "words")

    def __init__(self, u: int, v: int):
        self.u = u
        self.v = v
        self.words = array("I")

    def __len__(self) -> int:
        return len(self.words)

    def ws(self) -> np.ndarray:
        """Signed w-coordinates, ascending (read-only view math)."""
        return (np.frombuffer(self.words, dtype=np.uint32).astype(np.int64) & MASK30) - W_BIAS

    def _lower_bound(self, biased: int) -> tuple[int, int]:
        """First index whose biased w is >= ``biased``; returns (idx, comparisons)."""
        words = self.words
        lo, hi = 0, len(words)
        n_cmp = 0
        while lo < hi:
            mid = (lo + hi) // 2
            n_cmp += 1
            if (words[mid] & MASK30) < biased:
                lo = mid + 1
            else:
                hi = mid
        return lo, n_cmp

    def _upper_bound(self, biased: int) -> tuple[int, int]:
        """First index whose biased w is > ``biased``; returns (idx, comparisons)."""
        words = self.words
        lo, hi = 0, len(words)
        n_cmp = 0
        while lo < hi:
            mid = (lo + hi) // 2
            n_cmp += 1
            if (words[mid] & MASK30) <= biased:
                lo = mid + 1
            else:
                hi = mid
        return lo, n_cmp

    def insert(self, w: int, t: BoundaryType) -> None:
        word = pack(w, t)
        idx, _ = self._lower_bound(w + W_BIAS)
        if idx < len(self.words) and (self.words[idx] & MASK30) == w + W_BIAS:
            raise LogicError(f"double insert of boundary voxel ({self.u}, {self.v}, {w})")
        self.words.insert(idx, word)

    def remove(self, w: int) -> None:
        idx, _ = self._lower_bound(w + W_BIAS)
        if idx >= len(self.words) or (self.words[idx] & MASK30) != w + W_BIAS:
            raise LogicError(f"remove of missing boundary voxel ({self.u}, {self.v}, {w})")
        del self.words[idx]

    def discard_bulk(self, ws: np.ndarray) -> int:
        """Drop every stored voxel whose w appears in ``ws``; returns count removed."""
        if not len(self.words) or not len(ws):
            return 0
        cur = np.frombuffer(self.words, dtype=np.uint32)
        keep = ~np.isin((cur.astype(np.int64) & MASK30) - W_BIAS, ws)
        removed = int(len(cur) - keep.sum())
        if removed:
            self.words = array("I", cur[keep].tobytes())
        return removed

    def insert_bulk(self, ws: np.ndarray, types: np.ndarray) -> None:
        """Merge pre-validated new voxels into the column; duplicates are a bug."""
        if not len(ws):
            return
        new_words = pack_array(ws, types)
        cur = np.frombuffer(self.words, dtype=np.uint32)
        merged = np.concatenate([cur, new_words])
        keys = (merged.astype(np.int64) & MASK30)
        order = np.argsort(keys, kind="stable")
        keys = keys[order]
        if keys.size > 1 and np.any(keys[1:] == keys[:-1]):
            raise LogicError(f"double insert into column ({self.u}, {self.v})")
        self.words = array("I", merged[order].tobytes())

    def slice_range(self, w_lo: int, w_hi: int) -> list[tuple[int, BoundaryType]]:
        """Stored voxels with w in [w_lo, w_hi], ascending."""
        i0, _ = self._lower_bound(w_lo + W_BIAS)
        i1, _ = self._upper_bound(w_hi + W_BIAS)
        return [unpack(self.words[i]) for i in range(i0, i1)]


@dataclass
class QueryStats:
    """Running counters over `find_nearest_in_direction` calls."""

    queries: int = 0
    comparisons: int = 0
    column_voxels: int = 0  # lengths of the searched columns (0 when absent)

    def mean_comparisons(self) -> float:
        return self.comparisons / self.queries if self.queries else 0.0

    def mean_column_voxels(self) -> float:
        return self.column_voxels / self.queries if self.queries else 0.0


class BoundaryGrid2D:
    """Hash table from 2D cell to Column; the global map."""

    def __init__(self, table_size: int = 1 << 10, max_load: float = 0.75):
        if table_size <= 0 or table_size & (table_size - 1):
            raise InvalidInputError(f"table size must be a power of two, got {table_size}")
        self._q = table_size
        self._max_load = max_load
        self._buckets: list[list[Column]] = [[] for _ in range(table_size)]
        self._n_columns = 0
        self._n_voxels = 0
        self.stats = QueryStats()

    @property
    def table_size(self) -> int:
        return self._q

    @property
    def voxel_count(self) -> int:
        return self._n_voxels

    @property
    def column_count(self) -> int:
        return self._n_columns

    def __len__(self) -> int:
        return self._n_voxels

    def find_column(self, u: int, v: int) -> Optional[Column]:
        for col in self._buckets[hash_cell(u, v, self._q)]:
            if col.u == u and col.v == v:
                return col
        return None

    def _get_or_create(self, u: int, v: int) -> Column:
        bucket = self._buckets[hash_cell(u, v, self._q)]
        for col in bucket:
            if col.u == u and col.v == v:
                return col
        if (self._n_columns + 1) > self._max_load * self._q:
            self._rehash(self._q * 2)
            bucket = self._buckets[hash_cell(u, v, self._q)]
        col = Column(u, v)
        bucket.append(col)
        self._n_columns += 1
        return col

    def _rehash(self, new_q: int) -> None:
        old = self._buckets
        self._q = new_q
        self._buckets = [[] for _ in range(new_q)]
        for bucket in old:
            for col in bucket:
                self._buckets[hash_cell(col.u, col.v, new_q)].append(col)

    def _evict_if_empty(self, col: Column) -> None:
        if len(col.words) == 0:
            self._buckets[hash_cell(col.u, col.v, self._q)].remove(col)
            self._n_columns -= 1

    def insert_boundary_voxel(self, v: tuple[int, int, int], t: BoundaryType) -> None:
        col = self._get_or_create(v[0], v[1])
        col.insert(v[2], t)
        self._n_voxels += 1

    def remove_boundary_voxel(self, v: tuple[int, int, int]) -> None:
        col = self.find_column(v[0], v[1])
        if col is None:
            raise LogicError(f"remove of missing boundary voxel {tuple(v)}")
        col.remove(v[2])
        self._n_voxels -= 1
        self._evict_if_empty(col)

    def discard_bulk(self, u: int, v: int, ws: np.ndarray) -> int:
        col = self.find_column(u, v)
        if col is None:
            return 0
        removed = col.discard_bulk(ws)
        self._n_voxels -= removed
        self._evict_if_empty(col)
        return removed

    def insert_bulk(self, u: int, v: int, ws: np.ndarray, types: np.ndarray) -> None:
        if not len(ws):
            return
        col = self._get_or_create(u, v)
        col.insert_bulk(ws, types)
        self._n_voxels += len(ws)

    def bulk_load(self, coords: np.ndarray, types: np.ndarray) -> None:
        """Load (N, 3) internal voxel coords with matching types into the grid."""
        coords = np.asarray(coords, dtype=np.int64).reshape(-1, 3)
        types = np.asarray(types, dtype=np.uint8).reshape(-1)
        if not coords.size:
            return
        order = np.lexsort((coords[:, 2], coords[:, 1], coords[:, 0]))
        coords = coords[order]
        types = types[order]
        cell_change = np.any(coords[1:, :2] != coords[:-1, :2], axis=1)
        starts = np.concatenate([[0], np.nonzero(cell_change)[0] + 1, [len(coords)]])
        for i in range(len(starts) - 1):
            a, b = starts[i], starts[i + 1]
            self.insert_bulk(
                int(coords[a, 0]), int(coords[a, 1]), coords[a:b, 2], types[a:b]
            )

    def find_nearest_in_direction(self, q: tuple[int, int, int], direction: int):
        """Nearest stored boundary voxel from ``q`` along the projection axis.

        ``direction`` is ``W_PLUS`` or ``W_MINUS``. Returns
        ``(w, BoundaryType, r_min)`` or ``(None, None, None)``.
        """
        stats = self.stats
        stats.queries += 1
        col = self.find_column(q[0], q[1])
        if col is None:
            return None, None, None
        stats.column_voxels += len(col.words)
        biased = q[2] + W_BIAS
        if direction == W_PLUS:
            idx, n_cmp = col._lower_bound(biased)
            stats.comparisons += n_cmp
            if idx >= len(col.words):
                return None, None, None
        else:
            idx, n_cmp = col._upper_bound(biased)
            stats.comparisons += n_cmp
            idx -= 1
            if idx < 0:
                return None, None, None
        w, t = unpack(col.words[idx])
        return w, t, abs(w - q[2])

    def determine_occupancy(self, q: tuple[int, int, int], direction: int) -> OccState:
        """Occupancy of ``q`` from the nearest boundary voxel along ``direction``.

        On-map voxels (r_min = 0) take the state of their own boundary type;
        otherwise an interior nearest voxel proves free space and an exterior
        one (or none at all) leaves the query unknown.
        """
        w, t, r_min = self.find_nearest_in_direction(q, direction)
        if w is None:
            return OccState.UNKNOWN
        if r_min == 0:
            return state_of_boundary_type(t)
        if t == BoundaryType.INTERIOR:
            return OccState.FREE
        return OccState.UNKNOWN

    def iter_voxels(self) -> Iterator[tuple[int, int, int, BoundaryType]]:
        for bucket in self._buckets:
            for col in bucket:
                for word in col.words:
                    w, t = unpack(word)
                    yield col.u, col.v, w, t

    def list_frontier_voxels(self) -> list[tuple[int, int, int]]:
        """Stored exterior-unknown voxels: the free/unknown interface."""
        return [
            (u, v, w)
            for u, v, w, t in self.iter_voxels()
            if t == BoundaryType.EXTERIOR_UNKNOWN
        ]

    def to_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """All stored voxels as (coords int64[N,3], types uint8[N]), sorted."""
        items = sorted(self.iter_voxels())
        if not items:
            return np.empty((0, 3), dtype=np.int64), np.empty(0, dtype=np.uint8)
        arr = np.array([(u, v, w) for u, v, w, _ in items], dtype=np.int64)
        types = np.array([int(t) for _, _, _, t in items], dtype=np.uint8)
        return arr, types

    def voxel_set(self) -> dict[tuple[int, int, int], BoundaryType]:
        return {(u, v, w): t for u, v, w, t in self.iter_voxels()}

    # Memory model, documented:
    #   payload:   4 bytes per stored boundary voxel (one packed word)
    #   column:   16 bytes per column (cell coords 2x4 + length/capacity 8)
    #   table:     8 bytes per bucket slot (one pointer)
    PER_VOXEL_BYTES = 4
    PER_COLUMN_BYTES = 16
    PER_BUCKET_BYTES = 8

    def memory_report(self, occupied_density: float | None = None,
                      volume_m3: float | None = None,
                      resolution: float | None = None) -> dict:
        """Measured memory model, plus the analytic voxel estimate when the
        environment statistics (occupied density, volume, resolution) are
        supplied."""
        payload = self.PER_VOXEL_BYTES * self._n_voxels
        columns = self.PER_COLUMN_BYTES * self._n_columns
        table = self.PER_BUCKET_BYTES * self._q
        out = {
            "boundary_voxel_count": self._n_voxels,
            "column_count": self._n_columns,
            "table_size": self._q,
            "payload_bytes": payload,
            "column_overhead_bytes": columns,
            "table_bytes": table,
            "estimated_bytes": payload + columns + table,
        }
        if occupied_density is not None and volume_m3 is not None and resolution is not None:
            out["analytic_voxel_estimate"] = analytic_voxel_estimate(
                occupied_density, volume_m3, resolution
            )
        return out

    def reset_stats(self) -> None:
        self.stats = QueryStats()


def analytic_voxel_estimate(occupied_density: float, volume_m3: float, d: float) -> float:
    """Estimated boundary voxel count for an environment.

    Assumes one interior voxel per exterior voxel on average, so the count is
    twice the occupied voxel count ``occupied_density * volume / d^3``.
    """
    if d <= 0.0:
        raise InvalidInputError(f"resolution must be positive, got {d}")
    return 2.0 * occupied_density * volume_m3 / d**3


TYPE_NAMES = {
    BoundaryType.INTERIOR: "interior",
    BoundaryType.EXTERIOR_UNKNOWN: "ext_unknown",
    BoundaryType.EXTERIOR_OCCUPIED: "ext_occupied",
}
_NAME_TYPES = {name: t for t, name in TYPE_NAMES.items()}

CSV_HEADER = "u,v,w,type"


def export_csv(grid: BoundaryGrid2D, path, resolution: float, axis_name: str) -> None:
    """Write the map as ``u,v,w,type`` rows, sorted, with metadata comments."""
    coords, types = grid.to_arrays()
    with open(path, "w") as f:
        f.write(f"# boundarymap csv v1 resolution={resolution!r} axis={axis_name}\n")
        f.write(CSV_HEADER + "\n")
        for (u, v, w), t in zip(coords, types):
            f.write(f"{u},{v},{w},{TYPE_NAMES[BoundaryType(t)]}\n")


def load_csv(path) -> tuple[BoundaryGrid2D, float, str]:
    """Rebuild a grid from `export_csv` output; returns (grid, resolution, axis)."""
    resolution = None
    axis_name = None
    coords = []
    types = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line.split():
                    if tok.startswith("resolution="):
                        resolution = float(tok.split("=", 1)[1])
                    elif tok.startswith("axis="):
                        axis_name = tok.split("=", 1)[1]
                continue
            if line == CSV_HEADER:
                continue
            u, v, w, name = line.split(",")
            if name not in _NAME_TYPES:
                raise InvalidInputError(f"unknown boundary type {name!r} in {path}")
            coords.append((int(u), int(v), int(w)))
            types.append(int(_NAME_TYPES[name]))
    if resolution is None or axis_name is None:
        raise InvalidInputError(f"{path} is missing the resolution/axis metadata line")
    grid = BoundaryGrid2D()
    grid.bulk_load(np.array(coords, dtype=np.int64).reshape(-1, 3), np.array(types, dtype=np.uint8))
    return grid, resolution, axis_name


PLY_TYPE_CODE = {t: int(t) for t in BoundaryType}


def export_ply(grid: BoundaryGrid2D, path, resolution: float, axis) -> None:
    """ASCII PLY with one vertex per boundary voxel at its world-space center.

    ``axis`` is the ProjectionAxis used at ingestion; vertex coordinates are
    mapped back to world axes. The boundary type rides along as a uchar
    property (1 interior, 2 exterior-unknown, 3 exterior-occupied).
    """
    coords, types = grid.to_arrays()
    world = axis.to_world(coords) if coords.size else coords
    with open(path, "w") as f:
        f.write("ply\nformat ascii 1.0\n")
        f.write(f"element vertex {len(coords)}\n")
        f.write("property float x\nproperty float y\nproperty float z\n")
        f.write("property uchar boundary_type\n")
        f.write("end_header\n")
        for (x, y, z), t in zip(world, types):
            f.write(f"{x * resolution:.6g} {y * resolution:.6g} {z * resolution:.6g} {int(t)}\n")
