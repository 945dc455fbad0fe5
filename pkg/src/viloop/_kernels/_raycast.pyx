# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled ray-cast backend.

Bit-identical to viloop._kernels._raycast_py (same expressions, same branch
semantics, built with -ffp-contract=off).  Adds a padded-AABB prefilter and
an early skip against the current best hit; both are conservative, so they
never change results.  Rays are independent, so the parallel path is
bit-identical to sequential evaluation.

Origins may be (N, 3) or (1, 3); a single row is shared by all rays.
"""

import numpy as np

cimport cython
from cython.parallel cimport prange
from libc.math cimport INFINITY, fabs

DEF TRI_DET_EPS = 1e-12
DEF AABB_PAD = 1e-6


cdef inline double _aabb_enter(const double* lo, const double* hi,
                               double ox, double oy, double oz,
                               double wx, double wy, double wz,
                               double ix, double iy, double iz) noexcept nogil:
    """Entry distance into a padded AABB, clamped at 0; INFINITY on miss.

    ix/iy/iz are precomputed reciprocals of the direction components
    (unused for exact-zero components, which take the slab-membership
    branch instead)."""
    cdef double tmin = -INFINITY
    cdef double tmax = INFINITY
    cdef double o, w, inv, t1, t2, tmp
    cdef int i
    for i in range(3):
        if i == 0:
            o = ox; w = wx; inv = ix
        elif i == 1:
            o = oy; w = wy; inv = iy
        else:
            o = oz; w = wz; inv = iz
        if w == 0.0:
            if o < lo[i] or o > hi[i]:
                return INFINITY
        else:
            t1 = (lo[i] - o) * inv
            t2 = (hi[i] - o) * inv
            if t1 > t2:
                tmp = t1; t1 = t2; t2 = tmp
            if t1 > tmin:
                tmin = t1
            if t2 < tmax:
                tmax = t2
    if tmax < tmin or tmax < 0.0:
        return INFINITY
    if tmin > 0.0:
        return tmin
    return 0.0


cdef inline void _trace_ray(double ox, double oy, double oz,
                            double wx, double wy, double wz,
                            Py_ssize_t nb, const double* bc, const double* br,
                            const double* bh, const int* bvol,
                            const double* blo, const double* bhi,
                            Py_ssize_t nt, const double* tv, const int* tvol,
                            const double* tlo, const double* thi,
                            double max_range,
                            double* out_t, int* out_vol) noexcept nogil:
    cdef Py_ssize_t b, k
    cdef int i
    cdef double best = INFINITY
    cdef int best_vol = -1
    cdef double enter, dx, dy, dz, lo, ld, t1, t2, near, far, tmin, tmax, t
    cdef bint outside
    cdef double e1x, e1y, e1z, e2x, e2y, e2z, px, py, pz, det, inv
    cdef double sx, sy, sz, u, v, qx, qy, qz
    cdef const double* r
    cdef const double* h
    cdef const double* c
    cdef const double* tp
    cdef double ix = 1.0 / wx if wx != 0.0 else 0.0
    cdef double iy = 1.0 / wy if wy != 0.0 else 0.0
    cdef double iz = 1.0 / wz if wz != 0.0 else 0.0

    for b in range(nb):
        enter = _aabb_enter(blo + 3 * b, bhi + 3 * b, ox, oy, oz, wx, wy, wz, ix, iy, iz)
        if enter >= best or enter > max_range:
            continue
        c = bc + 3 * b
        r = br + 9 * b
        h = bh + 3 * b
        dx = ox - c[0]
        dy = oy - c[1]
        dz = oz - c[2]
        tmin = -INFINITY
        tmax = INFINITY
        outside = False
        for i in range(3):
            lo = r[i] * dx + r[3 + i] * dy + r[6 + i] * dz
            ld = r[i] * wx + r[3 + i] * wy + r[6 + i] * wz
            if ld == 0.0:
                if lo < -h[i] or lo > h[i]:
                    outside = True
                    break
            else:
                t1 = (-h[i] - lo) / ld
                t2 = (h[i] - lo) / ld
                if t1 < t2:
                    near = t1; far = t2
                else:
                    near = t2; far = t1
                if near > tmin:
                    tmin = near
                if far < tmax:
                    tmax = far
        if outside or tmax < tmin or tmax < 0.0:
            continue
        t = tmin if tmin >= 0.0 else tmax
        if t > 0.0 and t <= max_range and t < best:
            best = t
            best_vol = bvol[b]

    for k in range(nt):
        enter = _aabb_enter(tlo + 3 * k, thi + 3 * k, ox, oy, oz, wx, wy, wz, ix, iy, iz)
        if enter >= best or enter > max_range:
            continue
        tp = tv + 9 * k
        e1x = tp[3] - tp[0]
        e1y = tp[4] - tp[1]
        e1z = tp[5] - tp[2]
        e2x = tp[6] - tp[0]
        e2y = tp[7] - tp[1]
        e2z = tp[8] - tp[2]
        px = wy * e2z - wz * e2y
        py = wz * e2x - wx * e2z
        pz = wx * e2y - wy * e2x
        det = e1x * px + e1y * py + e1z * pz
        if fabs(det) < TRI_DET_EPS:
            continue
        inv = 1.0 / det
        sx = ox - tp[0]
        sy = oy - tp[1]
        sz = oz - tp[2]
        u = (sx * px + sy * py + sz * pz) * inv
        if u < 0.0 or u > 1.0:
            continue
        qx = sy * e1z - sz * e1y
        qy = sz * e1x - sx * e1z
        qz = sx * e1y - sy * e1x
        v = (wx * qx + wy * qy + wz * qz) * inv
        if v < 0.0 or u + v > 1.0:
            continue
        t = (e2x * qx + e2y * qy + e2z * qz) * inv
        if t > 0.0 and t <= max_range and t < best:
            best = t
            best_vol = tvol[k]

    out_t[0] = best
    out_vol[0] = best_vol


def raycast(origins, dirs, box_center, box_axes, box_half, box_vol,
            tri_v, tri_vol, max_range, parallel=True, rot=None):
    """Drop-in replacement for the numpy backend (see _raycast_py.raycast)."""
    o_arr = np.ascontiguousarray(origins, dtype=np.float64).reshape(-1, 3)
    d_arr = np.ascontiguousarray(dirs, dtype=np.float64).reshape(-1, 3)
    cdef bint has_rot = rot is not None
    cdef double r00 = 0, r01 = 0, r02 = 0, r10 = 0, r11 = 0, r12 = 0
    cdef double r20 = 0, r21 = 0, r22 = 0
    if has_rot:
        rm = np.asarray(rot, dtype=np.float64).reshape(3, 3)
        r00 = rm[0, 0]; r01 = rm[0, 1]; r02 = rm[0, 2]
        r10 = rm[1, 0]; r11 = rm[1, 1]; r12 = rm[1, 2]
        r20 = rm[2, 0]; r21 = rm[2, 1]; r22 = rm[2, 2]
    bc_arr = np.ascontiguousarray(np.asarray(box_center, dtype=np.float64).reshape(-1, 3))
    br_arr = np.ascontiguousarray(np.asarray(box_axes, dtype=np.float64).reshape(-1, 3, 3))
    bh_arr = np.ascontiguousarray(np.asarray(box_half, dtype=np.float64).reshape(-1, 3))
    bv_arr = np.ascontiguousarray(np.asarray(box_vol, dtype=np.int32).reshape(-1))
    tv_arr = np.ascontiguousarray(np.asarray(tri_v, dtype=np.float64).reshape(-1, 3, 3))
    tl_arr = np.ascontiguousarray(np.asarray(tri_vol, dtype=np.int32).reshape(-1))

    cdef Py_ssize_t n = d_arr.shape[0]
    cdef Py_ssize_t nb = bc_arr.shape[0]
    cdef Py_ssize_t nt = tv_arr.shape[0]
    cdef bint shared_origin = o_arr.shape[0] == 1
    if not shared_origin and o_arr.shape[0] != n:
        raise ValueError("origins must be (N, 3) matching dirs or (1, 3)")

    # Padded world AABBs (conservative prefilter bounds).
    if nb:
        ext = (np.abs(br_arr) @ bh_arr[:, :, None]).reshape(-1, 3)
        blo_arr = np.ascontiguousarray(bc_arr - ext - AABB_PAD)
        bhi_arr = np.ascontiguousarray(bc_arr + ext + AABB_PAD)
    else:
        blo_arr = np.zeros((0, 3))
        bhi_arr = np.zeros((0, 3))
    if nt:
        tlo_arr = np.ascontiguousarray(tv_arr.min(axis=1) - AABB_PAD)
        thi_arr = np.ascontiguousarray(tv_arr.max(axis=1) + AABB_PAD)
    else:
        tlo_arr = np.zeros((0, 3))
        thi_arr = np.zeros((0, 3))

    t_out = np.empty(n, dtype=np.float64)
    vol_out = np.empty(n, dtype=np.int32)

    cdef const double[:, ::1] o = o_arr
    cdef const double[:, ::1] d = d_arr
    cdef const double[:, ::1] bc = bc_arr
    cdef const double[:, :, ::1] br = br_arr
    cdef const double[:, ::1] bh = bh_arr
    cdef const int[::1] bv = bv_arr
    cdef const double[:, :, ::1] tv = tv_arr
    cdef const int[::1] tvl = tl_arr
    cdef const double[:, ::1] blo = blo_arr
    cdef const double[:, ::1] bhi = bhi_arr
    cdef const double[:, ::1] tlo = tlo_arr
    cdef const double[:, ::1] thi = thi_arr
    cdef double[::1] tbuf = t_out
    cdef int[::1] vbuf = vol_out

    cdef const double* o_p = &o[0, 0] if n or shared_origin else NULL
    cdef const double* d_p = &d[0, 0] if n else NULL
    cdef const double* bc_p = &bc[0, 0] if nb else NULL
    cdef const double* br_p = &br[0, 0, 0] if nb else NULL
    cdef const double* bh_p = &bh[0, 0] if nb else NULL
    cdef const int* bv_p = &bv[0] if nb else NULL
    cdef const double* blo_p = &blo[0, 0] if nb else NULL
    cdef const double* bhi_p = &bhi[0, 0] if nb else NULL
    cdef const double* tv_p = &tv[0, 0, 0] if nt else NULL
    cdef const int* tvl_p = &tvl[0] if nt else NULL
    cdef const double* tlo_p = &tlo[0, 0] if nt else NULL
    cdef const double* thi_p = &thi[0, 0] if nt else NULL
    cdef double* t_p = &tbuf[0] if n else NULL
    cdef int* v_p = &vbuf[0] if n else NULL

    cdef double mr = max_range
    cdef Py_ssize_t r_i, oi
    cdef double lx, ly, lz, wx, wy, wz
    cdef bint par = parallel and n > 2048

    if par:
        for r_i in prange(n, nogil=True, schedule='static'):
            oi = 0 if shared_origin else r_i
            lx = d_p[3 * r_i]; ly = d_p[3 * r_i + 1]; lz = d_p[3 * r_i + 2]
            if has_rot:
                wx = r00 * lx + r01 * ly + r02 * lz
                wy = r10 * lx + r11 * ly + r12 * lz
                wz = r20 * lx + r21 * ly + r22 * lz
            else:
                wx = lx; wy = ly; wz = lz
            _trace_ray(o_p[3 * oi], o_p[3 * oi + 1], o_p[3 * oi + 2],
                       wx, wy, wz,
                       nb, bc_p, br_p, bh_p, bv_p, blo_p, bhi_p,
                       nt, tv_p, tvl_p, tlo_p, thi_p, mr,
                       t_p + r_i, v_p + r_i)
    else:
        with nogil:
            for r_i in range(n):
                oi = 0 if shared_origin else r_i
                lx = d_p[3 * r_i]; ly = d_p[3 * r_i + 1]; lz = d_p[3 * r_i + 2]
                if has_rot:
                    wx = r00 * lx + r01 * ly + r02 * lz
                    wy = r10 * lx + r11 * ly + r12 * lz
                    wz = r20 * lx + r21 * ly + r22 * lz
                else:
                    wx = lx; wy = ly; wz = lz
                _trace_ray(o_p[3 * oi], o_p[3 * oi + 1], o_p[3 * oi + 2],
                           wx, wy, wz,
                           nb, bc_p, br_p, bh_p, bv_p, blo_p, bhi_p,
                           nt, tv_p, tvl_p, tlo_p, thi_p, mr,
                           t_p + r_i, v_p + r_i)

    return t_out, vol_out
