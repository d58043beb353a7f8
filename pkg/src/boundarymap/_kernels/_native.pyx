# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled ray traversal kernel.

Bit-identical twin of ``fallback.raycast_grid``; the rounding helper mirrors
``core.round_half_away`` including its tie-snapping tolerance. Keep the three
implementations in lockstep (tests/test_kernels.py checks equivalence).
"""
import numpy as np

from libc.math cimport floor, fabs, sqrt

BACKEND_NAME = "native"

cdef double INF = float("inf")
# 32 * DBL_EPSILON, same constant as core._TIE_RTOL
cdef double TIE_RTOL = 32.0 * 2.220446049250313e-16


cdef inline long _round_half_away(double q) noexcept nogil:
    cdef double q2 = 2.0 * q
    cdef double r2 = floor(q2 + 0.5)
    cdef long r2i
    cdef double f
    if fabs(q2 - r2) <= TIE_RTOL * max(1.0, fabs(q2)):
        r2i = <long> r2
        if r2i % 2 == 0:
            return r2i // 2
        if q > 0.0:
            return (r2i + 1) // 2
        return (r2i - 1) // 2
    f = floor(q)
    if q - f > 0.5:
        return <long> f + 1
    return <long> f


def raycast_grid(origin, points, double resolution, double max_range, clip_lo, clip_hi):
    """See ``fallback.raycast_grid`` for the contract."""
    cdef double[::1] o = np.ascontiguousarray(origin, dtype=np.float64)
    cdef double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
    cdef long lo0 = int(clip_lo[0]), lo1 = int(clip_lo[1]), lo2 = int(clip_lo[2])
    cdef long hi0 = int(clip_hi[0]), hi1 = int(clip_hi[1]), hi2 = int(clip_hi[2])
    cdef double d = resolution

    cdef Py_ssize_t n = pts.shape[0]
    cdef long max_steps_per_ray = 3 * (<long> (max_range / d) + 3) + 2
    cdef Py_ssize_t cap = n * max_steps_per_ray + 1

    miss_buf = np.empty((cap, 3), dtype=np.int32)
    hit_buf = np.empty((n, 3), dtype=np.int32)
    cdef int[:, ::1] miss = miss_buf
    cdef int[:, ::1] hit = hit_buf

    cdef Py_ssize_t n_miss = 0, n_hit = 0
    cdef long skipped = 0

    cdef long sv0 = _round_half_away(o[0] / d)
    cdef long sv1 = _round_half_away(o[1] / d)
    cdef long sv2 = _round_half_away(o[2] / d)

    cdef Py_ssize_t k
    cdef double px, py, pz, dx, dy, dz, dist, scale, ex, ey, ez, seg, best
    cdef long ev0, ev1, ev2, c0, c1, c2, total, axis, a
    cdef long rem[3]
    cdef long stp[3]
    cdef long cur[3]
    cdef long ev[3]
    cdef double tmax[3]
    cdef double tdel[3]
    cdef double endc[3]
    cdef bint is_hit, in_box

    with nogil:
        for k in range(n):
            px = pts[k, 0]; py = pts[k, 1]; pz = pts[k, 2]
            dx = px - o[0]; dy = py - o[1]; dz = pz - o[2]
            dist = sqrt(dx * dx + dy * dy + dz * dz)
            if dist == 0.0:
                skipped += 1
                continue
            if dist > max_range:
                scale = max_range / dist
                ex = o[0] + dx * scale; ey = o[1] + dy * scale; ez = o[2] + dz * scale
                is_hit = False
            else:
                ex = px; ey = py; ez = pz
                is_hit = True
            endc[0] = ex; endc[1] = ey; endc[2] = ez
            ev[0] = _round_half_away(ex / d)
            ev[1] = _round_half_away(ey / d)
            ev[2] = _round_half_away(ez / d)

            cur[0] = sv0; cur[1] = sv1; cur[2] = sv2
            total = 0
            for a in range(3):
                rem[a] = ev[a] - cur[a]
                if rem[a] < 0:
                    rem[a] = -rem[a]
                total += rem[a]
                stp[a] = 0
                tmax[a] = INF
                tdel[a] = INF
                if rem[a] > 0:
                    stp[a] = 1 if ev[a] > cur[a] else -1
                    seg = endc[a] - o[a]
                    tmax[a] = ((cur[a] + 0.5 * stp[a]) * d - o[a]) / seg
                    tdel[a] = d / fabs(seg)

            while total > 0:
                axis = -1
                best = INF
                for a in range(3):
                    if rem[a] > 0 and tmax[a] < best:
                        best = tmax[a]
                        axis = a
                if (lo0 <= cur[0] <= hi0 and lo1 <= cur[1] <= hi1
                        and lo2 <= cur[2] <= hi2):
                    miss[n_miss, 0] = <int> cur[0]
                    miss[n_miss, 1] = <int> cur[1]
                    miss[n_miss, 2] = <int> cur[2]
                    n_miss += 1
                cur[axis] += stp[axis]
                tmax[axis] += tdel[axis]
                rem[axis] -= 1
                total -= 1

            in_box = (lo0 <= cur[0] <= hi0 and lo1 <= cur[1] <= hi1
                      and lo2 <= cur[2] <= hi2)
            if in_box:
                if is_hit:
                    hit[n_hit, 0] = <int> cur[0]
                    hit[n_hit, 1] = <int> cur[1]
                    hit[n_hit, 2] = <int> cur[2]
                    n_hit += 1
                else:
                    miss[n_miss, 0] = <int> cur[0]
                    miss[n_miss, 1] = <int> cur[1]
                    miss[n_miss, 2] = <int> cur[2]
                    n_miss += 1

    return miss_buf[:n_miss].copy(), hit_buf[:n_hit].copy(), int(skipped)
