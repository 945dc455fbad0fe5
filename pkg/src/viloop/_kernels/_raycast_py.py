"""Pure-numpy ray-cast backend.

Defines the floating-point contract for the compiled kernel: identical
expressions, identical branch semantics, strict-less first-wins nearest-hit
over boxes (array order) then triangles (array order).  The compiled backend
must return bit-identical results.
"""

from __future__ import annotations

import numpy as np

TRI_DET_EPS = 1e-12


def raycast(origins, dirs, box_center, box_axes, box_half, box_vol,
            tri_v, tri_vol, max_range, parallel=True, rot=None):
    """Nearest-hit distances for N rays against B boxes and T triangles.

    Args:
        origins: (N, 3) ray origins, world frame; (1, 3) shares one origin
            across all rays.
        dirs: (N, 3) unit directions (sensor frame when rot is given).
        box_center: (B, 3); box_axes: (B, 3, 3) rotation (columns are the box
            local axes); box_half: (B, 3); box_vol: (B,) int32 volume index.
        tri_v: (T, 3, 3) triangle vertices; tri_vol: (T,) int32 volume index.
        max_range: hits beyond this are misses.
        parallel: accepted for signature parity with the compiled backend.
        rot: optional (3, 3) rotation applied to each direction (world =
            rot @ dir), with fixed left-associated expression order so both
            backends agree bitwise.

    Returns:
        (t, vol): t is (N,) float64 with +inf for misses; vol is (N,) int32
        with -1 for misses.
    """
    origins = np.ascontiguousarray(origins, dtype=np.float64).reshape(-1, 3)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64).reshape(-1, 3)
    n = dirs.shape[0]
    if origins.shape[0] not in (1, n):
        raise ValueError("origins must be (N, 3) matching dirs or (1, 3)")
    best = np.full(n, np.inf)
    vol = np.full(n, -1, dtype=np.int32)

    ox, oy, oz = origins[:, 0], origins[:, 1], origins[:, 2]
    if rot is None:
        wx, wy, wz = dirs[:, 0], dirs[:, 1], dirs[:, 2]
    else:
        rm = np.asarray(rot, dtype=np.float64).reshape(3, 3)
        lx, ly, lz = dirs[:, 0], dirs[:, 1], dirs[:, 2]
        wx = rm[0, 0] * lx + rm[0, 1] * ly + rm[0, 2] * lz
        wy = rm[1, 0] * lx + rm[1, 1] * ly + rm[1, 2] * lz
        wz = rm[2, 0] * lx + rm[2, 1] * ly + rm[2, 2] * lz

    box_center = np.asarray(box_center, dtype=np.float64).reshape(-1, 3)
    box_axes = np.asarray(box_axes, dtype=np.float64).reshape(-1, 3, 3)
    box_half = np.asarray(box_half, dtype=np.float64).reshape(-1, 3)
    box_vol = np.asarray(box_vol, dtype=np.int32).reshape(-1)

    for b in range(box_center.shape[0]):
        c = box_center[b]
        r = box_axes[b]
        h = box_half[b]
        dx = ox - c[0]
        dy = oy - c[1]
        dz = oz - c[2]
        tmin = np.full(n, -np.inf)
        tmax = np.full(n, np.inf)
        outside = np.zeros(n, dtype=bool)
        for i in range(3):
            lo = r[0, i] * dx + r[1, i] * dy + r[2, i] * dz
            ld = r[0, i] * wx + r[1, i] * wy + r[2, i] * wz
            zero = ld == 0.0
            safe = np.where(zero, 1.0, ld)
            t1 = (-h[i] - lo) / safe
            t2 = (h[i] - lo) / safe
            near = np.minimum(t1, t2)
            far = np.maximum(t1, t2)
            near = np.where(zero, -np.inf, near)
            far = np.where(zero, np.inf, far)
            outside |= zero & ((lo < -h[i]) | (lo > h[i]))
            tmin = np.maximum(tmin, near)
            tmax = np.minimum(tmax, far)
        t = np.where(tmin >= 0.0, tmin, tmax)
        valid = (~outside) & (tmax >= tmin) & (tmax >= 0.0) & (t > 0.0) & (t <= max_range)
        t = np.where(valid, t, np.inf)
        better = t < best
        best = np.where(better, t, best)
        vol = np.where(better, box_vol[b], vol)

    tri_v = np.asarray(tri_v, dtype=np.float64).reshape(-1, 3, 3)
    tri_vol = np.asarray(tri_vol, dtype=np.int32).reshape(-1)

    for k in range(tri_v.shape[0]):
        v0, v1, v2 = tri_v[k]
        e1 = v1 - v0
        e2 = v2 - v0
        px = wy * e2[2] - wz * e2[1]
        py = wz * e2[0] - wx * e2[2]
        pz = wx * e2[1] - wy * e2[0]
        det = e1[0] * px + e1[1] * py + e1[2] * pz
        parallel = np.abs(det) < TRI_DET_EPS
        inv = 1.0 / np.where(parallel, 1.0, det)
        sx = ox - v0[0]
        sy = oy - v0[1]
        sz = oz - v0[2]
        u = (sx * px + sy * py + sz * pz) * inv
        qx = sy * e1[2] - sz * e1[1]
        qy = sz * e1[0] - sx * e1[2]
        qz = sx * e1[1] - sy * e1[0]
        v = (wx * qx + wy * qy + wz * qz) * inv
        t = (e2[0] * qx + e2[1] * qy + e2[2] * qz) * inv
        valid = (
            (~parallel)
            & (u >= 0.0) & (u <= 1.0)
            & (v >= 0.0) & (u + v <= 1.0)
            & (t > 0.0) & (t <= max_range)
        )
        t = np.where(valid, t, np.inf)
        better = t < best
        best = np.where(better, t, best)
        vol = np.where(better, tri_vol[k], vol)

    return best, vol
