"""Pure-Python ray traversal kernel.

Semantics must stay bit-identical to the compiled kernel in ``_native.pyx``;
``tests/test_kernels.py`` enforces the equivalence on random workloads. Any
change here must be mirrored there.
"""
from __future__ import annotations

import math

import numpy as np

from ..core import round_half_away

BACKEND_NAME = "fallback"


def raycast_grid(origin, points, resolution, max_range, clip_lo, clip_hi):
    """Trace every ray of one scan through the voxel grid.

    Each ray runs from ``origin`` toward one point of ``points``. Rays longer
    than ``max_range`` are truncated at ``max_range`` and record no hit; all
    voxels the (possibly truncated) ray passes through count as misses, and
    an untruncated ray additionally records a hit in its endpoint voxel
    (the endpoint voxel never receives a miss from its own ray). Voxels
    outside the inclusive box ``[clip_lo, clip_hi]`` are dropped. Points at
    zero distance from the origin are skipped and counted.

    Returns ``(miss_coords int32[M,3], hit_coords int32[H,3], skipped)``.
    """
    o = [float(origin[0]), float(origin[1]), float(origin[2])]
    d = float(resolution)
    lo = [int(clip_lo[0]), int(clip_lo[1]), int(clip_lo[2])]
    hi = [int(clip_hi[0]), int(clip_hi[1]), int(clip_hi[2])]

    misses = []
    hits = []
    skipped = 0
    sv = [round_half_away(o[0] / d), round_half_away(o[1] / d), round_half_away(o[2] / d)]

    for k in range(len(points)):
        px, py, pz = float(points[k][0]), float(points[k][1]), float(points[k][2])
        dx, dy, dz = px - o[0], py - o[1], pz - o[2]
        dist = math.sqrt(dx * dx + dy * dy + dz * dz)
        if dist == 0.0:
            skipped += 1
            continue
        if dist > max_range:
            scale = max_range / dist
            ex, ey, ez = o[0] + dx * scale, o[1] + dy * scale, o[2] + dz * scale
            hit = False
        else:
            ex, ey, ez = px, py, pz
            hit = True
        end = [ex, ey, ez]
        ev = [round_half_away(ex / d), round_half_away(ey / d), round_half_away(ez / d)]

        cur = list(sv)
        remaining = [abs(ev[a] - sv[a]) for a in range(3)]
        total = remaining[0] + remaining[1] + remaining[2]
        step = [0, 0, 0]
        t_max = [math.inf, math.inf, math.inf]
        t_delta = [math.inf, math.inf, math.inf]
        for a in range(3):
            if remaining[a] > 0:
                step[a] = 1 if ev[a] > sv[a] else -1
                seg = end[a] - o[a]
                t_max[a] = ((sv[a] + 0.5 * step[a]) * d - o[a]) / seg
                t_delta[a] = d / abs(seg)

        for _ in range(total):
            # first axis with minimal t_max among axes that still need steps
            axis = -1
            best = math.inf
            for a in range(3):
                if remaining[a] > 0 and t_max[a] < best:
                    best = t_max[a]
                    axis = a
            if (
                lo[0] <= cur[0] <= hi[0]
                and lo[1] <= cur[1] <= hi[1]
                and lo[2] <= cur[2] <= hi[2]
            ):
                misses.append((cur[0], cur[1], cur[2]))
            cur[axis] += step[axis]
            t_max[axis] += t_delta[axis]
            remaining[axis] -= 1

        in_box = (
            lo[0] <= cur[0] <= hi[0]
            and lo[1] <= cur[1] <= hi[1]
            and lo[2] <= cur[2] <= hi[2]
        )
        if in_box:
            if hit:
                hits.append((cur[0], cur[1], cur[2]))
            else:
                misses.append((cur[0], cur[1], cur[2]))

    miss_arr = np.array(misses, dtype=np.int32).reshape(-1, 3)
    hit_arr = np.array(hits, dtype=np.int32).reshape(-1, 3)
    return miss_arr, hit_arr, skipped
