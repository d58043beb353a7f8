"""Shared coordinate, probability, and state primitives.

Conventions used throughout the package:

* Voxel ``n`` covers the cube centered at ``n * d`` with side ``d`` (the map
  resolution in meters). World-to-voxel conversion rounds each component of
  ``p / d`` to the nearest integer, with ties rounded half away from zero.
  Because the inputs are binary floats, values that are mathematically exact
  ties (e.g. ``0.15 / 0.1``) may land a few ulps off ``k + 0.5``; ties are
  therefore detected within a small relative tolerance before rounding.
* Log-odds values are stored as float32 inside grids and computed in float64
  everywhere else. State thresholding of grid-resident values must use the
  float32-cast thresholds (`state_from_logodds_f32`) so that a voxel assigned
  exactly ``l_free`` or ``l_occ`` lands on the intended side of the cut.

All functions here are pure and safe to call from any thread.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import NamedTuple

import numpy as np


class InvalidInputError(ValueError):
    """Raised when caller-supplied data violates a documented precondition."""


class LogicError(RuntimeError):
    """Raised for conditions that can only arise from an internal bug."""


class OccState(IntEnum):
    """Three-way occupancy state of a voxel."""

    UNKNOWN = 0
    FREE = 1
    OCCUPIED = 2


class VoxelIndex(NamedTuple):
    x: int
    y: int
    z: int


class WorldPoint(NamedTuple):
    x: float
    y: float
    z: float


class CellIndex2D(NamedTuple):
    u: int
    v: int


class ProjectionAxis(IntEnum):
    """World axis along which boundary voxels are collapsed into columns.

    Internal coordinates are always (u, v, w) with w the projection axis;
    ``permutation`` maps world components to internal ones and is applied
    once at ingestion. Exports apply ``inverse``.
    """

    X = 0
    Y = 1
    Z = 2

    @property
    def permutation(self) -> tuple[int, int, int]:
        # (u, v) are the remaining world axes in their natural order.
        return {
            ProjectionAxis.X: (1, 2, 0),
            ProjectionAxis.Y: (0, 2, 1),
            ProjectionAxis.Z: (0, 1, 2),
        }[self]

    @property
    def inverse(self) -> tuple[int, int, int]:
        perm = self.permutation
        inv = [0, 0, 0]
        for internal, world in enumerate(perm):
            inv[world] = internal
        return tuple(inv)

    def to_internal(self, xyz):
        """Permute one triple or an (N, 3) array from world to internal axes."""
        p = self.permutation
        if isinstance(xyz, np.ndarray):
            return xyz[..., list(p)]
        return (xyz[p[0]], xyz[p[1]], xyz[p[2]])

    def to_world(self, uvw):
        inv = self.inverse
        if isinstance(uvw, np.ndarray):
            return uvw[..., list(inv)]
        return (uvw[inv[0]], uvw[inv[1]], uvw[inv[2]])

    @classmethod
    def from_name(cls, name: str) -> "ProjectionAxis":
        try:
            return cls[name.upper()]
        except KeyError:
            raise InvalidInputError(f"unknown projection axis {name!r}") from None


# Relative tolerance for detecting half-integer rounding ties; see module
# docstring. 32 ulps is far below any physically meaningful displacement.
_TIE_RTOL = 32.0 * float(np.finfo(np.float64).eps)


def round_half_away(q: float) -> int:
    """Round to nearest integer, ties away from zero (tolerance-snapped)."""
    q2 = 2.0 * q
    r2 = round(q2)
    if abs(q2 - r2) <= _TIE_RTOL * max(1.0, abs(q2)):
        if r2 % 2 == 0:
            return r2 // 2
        return (r2 + 1) // 2 if q > 0.0 else (r2 - 1) // 2
    f = math.floor(q)
    return f + 1 if (q - f) > 0.5 else f


def round_half_away_array(q: np.ndarray) -> np.ndarray:
    """Vectorized `round_half_away`; must stay bit-equivalent to the scalar."""
    q = np.asarray(q, dtype=np.float64)
    q2 = 2.0 * q
    r2 = np.rint(q2)
    near = np.abs(q2 - r2) <= _TIE_RTOL * np.maximum(1.0, np.abs(q2))
    r2i = r2.astype(np.int64)
    odd = (r2i & 1) == 1
    f = np.floor(q)
    out = np.where((q - f) > 0.5, f + 1.0, f).astype(np.int64)
    out = np.where(near & ~odd, r2i // 2, out)
    tie_sign = np.where(q > 0.0, 1, -1)
    out = np.where(near & odd, (r2i + tie_sign) // 2, out)
    return out


def world_to_voxel(p, d: float) -> VoxelIndex:
    """Map a world point (meters) to the index of the voxel containing it."""
    if d <= 0.0 or not math.isfinite(d):
        raise InvalidInputError(f"resolution must be a positive finite number, got {d}")
    if not all(math.isfinite(c) for c in p):
        raise InvalidInputError(f"non-finite world point {tuple(p)}")
    return VoxelIndex(*(round_half_away(c / d) for c in p))


def world_to_voxel_array(points: np.ndarray, d: float) -> np.ndarray:
    """Vectorized `world_to_voxel` for an (N, 3) array of world points."""
    points = np.asarray(points, dtype=np.float64)
    if not np.all(np.isfinite(points)):
        raise InvalidInputError("non-finite world point in array")
    return round_half_away_array(points / d)


def voxel_center(v, d: float):
    """World-space center of voxel ``v``."""
    if isinstance(v, np.ndarray):
        return v.astype(np.float64) * d
    return WorldPoint(v[0] * d, v[1] * d, v[2] * d)


def prob_to_logodds(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise InvalidInputError(f"probability must be in (0, 1), got {p}")
    return math.log(p / (1.0 - p))


def logodds_to_prob(l: float) -> float:
    return 1.0 / (1.0 + math.exp(-l))


@dataclass(frozen=True)
class ProbParams:
    """Log-odds update parameters plus map resolution and sensor range.

    Invariants (checked on construction):
    ``l_min <= l_free < 0 < l_occ <= l_max``, ``l_miss < 0 < l_hit``,
    ``resolution > 0``, ``sensor_range > 0``.
    """

    l_hit: float
    l_miss: float
    l_max: float
    l_min: float
    l_free: float
    l_occ: float
    resolution: float
    sensor_range: float

    def __post_init__(self):
        if not (self.l_min <= self.l_free < 0.0 < self.l_occ <= self.l_max):
            raise InvalidInputError(
                "require l_min <= l_free < 0 < l_occ <= l_max, got "
                f"l_min={self.l_min}, l_free={self.l_free}, "
                f"l_occ={self.l_occ}, l_max={self.l_max}"
            )
        if not (self.l_miss < 0.0 < self.l_hit):
            raise InvalidInputError(
                f"require l_miss < 0 < l_hit, got l_miss={self.l_miss}, l_hit={self.l_hit}"
            )
        if self.resolution <= 0.0:
            raise InvalidInputError(f"resolution must be positive, got {self.resolution}")
        if self.sensor_range <= 0.0:
            raise InvalidInputError(f"sensor range must be positive, got {self.sensor_range}")
        # float32 copies of the state thresholds; grids store log-odds as
        # float32 and must threshold in the same precision.
        object.__setattr__(self, "l_free_f32", np.float32(self.l_free))
        object.__setattr__(self, "l_occ_f32", np.float32(self.l_occ))

    @classmethod
    def from_probabilities(
        cls,
        p_hit: float = 0.8,
        p_miss: float = 0.48,
        p_min: float = 0.05,
        p_max: float = 0.97,
        p_free: float = 0.2,
        p_occ: float = 0.8,
        resolution: float = 0.2,
        sensor_range: float = 10.0,
    ) -> "ProbParams":
        return cls(
            l_hit=prob_to_logodds(p_hit),
            l_miss=prob_to_logodds(p_miss),
            l_max=prob_to_logodds(p_max),
            l_min=prob_to_logodds(p_min),
            l_free=prob_to_logodds(p_free),
            l_occ=prob_to_logodds(p_occ),
            resolution=resolution,
            sensor_range=sensor_range,
        )


def clamp_logodds(l: float, params: ProbParams) -> float:
    return max(min(l, params.l_max), params.l_min)


def state_from_logodds(l: float, params: ProbParams) -> OccState:
    """Threshold a float64 log-odds value into a discrete state."""
    if l <= params.l_free:
        return OccState.FREE
    if l >= params.l_occ:
        return OccState.OCCUPIED
    return OccState.UNKNOWN


def state_from_logodds_f32(l, params: ProbParams) -> OccState:
    """Threshold a float32 grid value against float32-cast thresholds."""
    l = np.float32(l)
    if l <= params.l_free_f32:
        return OccState.FREE
    if l >= params.l_occ_f32:
        return OccState.OCCUPIED
    return OccState.UNKNOWN


def states_from_logodds_array(logodds: np.ndarray, params: ProbParams) -> np.ndarray:
    """Vectorized state thresholding of a float32 log-odds array (uint8 out)."""
    out = np.zeros(logodds.shape, dtype=np.uint8)
    out[logodds <= params.l_free_f32] = int(OccState.FREE)
    out[logodds >= params.l_occ_f32] = int(OccState.OCCUPIED)
    return out
