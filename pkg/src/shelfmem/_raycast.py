"""Numba kernels for 3D DDA voxel traversal (Amanatides & Woo).

All coordinates are in grid units: x along columns (W), y along rows (H),
z along layers (D).  Flat voxel index is ``(i * W + j) * D + k``.  The grid
box is the shelf interior; rays from outside may only enter through the
open front face ``y = 0`` -- the other faces are shelf walls.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_EPS = 1e-9


@njit(cache=True)
def _entry(ox, oy, oz, dx, dy, dz, W, H, D):
    """Return (t_enter, t_exit, ok).  ``ok`` is False when the ray misses or hits a wall."""
    tmin = -math.inf
    tmax = math.inf
    axis = -1
    o = (ox, oy, oz)
    d = (dx, dy, dz)
    n = (W, H, D)
    for a in range(3):
        if d[a] == 0.0:
            if o[a] < 0.0 or o[a] > n[a]:
                return 0.0, 0.0, False
            continue
        t1 = (0.0 - o[a]) / d[a]
        t2 = (n[a] - o[a]) / d[a]
        if t1 > t2:
            t1, t2 = t2, t1
        if t1 > tmin:
            tmin = t1
            axis = a
        if t2 < tmax:
            tmax = t2
    if tmax < max(tmin, 0.0):
        return 0.0, 0.0, False
    if tmin <= 0.0:
        return 0.0, tmax, True
    # entering from outside: only the open front (y = 0 plane, moving +y) is allowed
    if axis != 1 or dy <= 0.0:
        return 0.0, 0.0, False
    return tmin, tmax, True


@njit(cache=True)
def march(ox, oy, oz, dx, dy, dz, t_range, blocked, out):
    """Traverse voxels along a unit ray; stops at the first ``blocked`` voxel.

    Writes flat indices to ``out`` and returns ``(n, hit, t_stop)``.  On a hit
    the blocking voxel is the last written index and ``t_stop`` is the ray
    parameter where the ray enters it.
    """
    H, W, D = blocked.shape
    t0, t1, ok = _entry(ox, oy, oz, dx, dy, dz, W, H, D)
    if not ok:
        return 0, False, 0.0
    t_end = min(t1, t_range)
    if t0 >= t_end:
        return 0, False, t_end
    tp = t0 + _EPS
    px = ox + dx * tp
    py = oy + dy * tp
    pz = oz + dz * tp
    j = min(max(int(math.floor(px)), 0), W - 1)
    i = min(max(int(math.floor(py)), 0), H - 1)
    k = min(max(int(math.floor(pz)), 0), D - 1)

    if dx > 0:
        sx = 1
        tmx = (j + 1 - ox) / dx
        tdx = 1.0 / dx
    elif dx < 0:
        sx = -1
        tmx = (j - ox) / dx
        tdx = -1.0 / dx
    else:
        sx = 0
        tmx = math.inf
        tdx = math.inf
    if dy > 0:
        sy = 1
        tmy = (i + 1 - oy) / dy
        tdy = 1.0 / dy
    elif dy < 0:
        sy = -1
        tmy = (i - oy) / dy
        tdy = -1.0 / dy
    else:
        sy = 0
        tmy = math.inf
        tdy = math.inf
    if dz > 0:
        sz = 1
        tmz = (k + 1 - oz) / dz
        tdz = 1.0 / dz
    elif dz < 0:
        sz = -1
        tmz = (k - oz) / dz
        tdz = -1.0 / dz
    else:
        sz = 0
        tmz = math.inf
        tdz = math.inf

    t = t0
    n = 0
    while True:
        out[n] = (i * W + j) * D + k
        n += 1
        if blocked[i, j, k]:
            return n, True, t
        if tmx < tmy and tmx < tmz:
            t = tmx
            j += sx
            tmx += tdx
        elif tmy < tmz:
            t = tmy
            i += sy
            tmy += tdy
        else:
            t = tmz
            k += sz
            tmz += tdz
        if t >= t_end or i < 0 or i >= H or j < 0 or j >= W or k < 0 or k >= D:
            break
    return n, False, t_end


@njit(cache=True)
def render_rays(origin, dirs, t_range, occ, sem):
    """Cast every ray against ground truth; returns CSR traversal plus per-ray hit data."""
    H, W, D = occ.shape
    nr = dirs.shape[0]
    cap = H + W + D + 4
    buf = np.empty(cap, dtype=np.int64)
    offsets = np.zeros(nr + 1, dtype=np.int64)
    flat = np.empty(nr * cap, dtype=np.int64)
    hit = np.zeros(nr, dtype=np.bool_)
    dist = np.full(nr, t_range)
    cls = np.full(nr, -1, dtype=np.int64)
    pos = 0
    for r in range(nr):
        n, h, t = march(origin[0], origin[1], origin[2], dirs[r, 0], dirs[r, 1], dirs[r, 2], t_range, occ, buf)
        for q in range(n):
            flat[pos + q] = buf[q]
        pos += n
        offsets[r + 1] = pos
        if h:
            hit[r] = True
            dist[r] = t
            v = buf[n - 1]
            i = v // (W * D)
            j = (v // D) % W
            cls[r] = sem[i, j]
    return offsets, flat[:pos].copy(), hit, dist, cls


@njit(cache=True)
def fuse_rays(alpha, beta, lam, offsets, flat, hit, cls, w, ws, free_cls, extrude):
    """Conjugate fusion of one rendered observation, in place.

    ``w`` weights occupancy evidence, ``ws`` semantic evidence.
    """
    H, W, D = alpha.shape
    nr = hit.shape[0]
    for r in range(nr):
        a = offsets[r]
        b = offsets[r + 1]
        nfree = b - a - (1 if hit[r] else 0)
        for q in range(a, a + nfree):
            v = flat[q]
            i = v // (W * D)
            j = (v // D) % W
            k = v % D
            beta[i, j, k] += w
            if k == 0:
                # free board voxel: the whole column is empty (objects stand on the board)
                lam[i, j, free_cls] += ws
        if hit[r]:
            v = flat[b - 1]
            i = v // (W * D)
            j = (v // D) % W
            k = v % D
            alpha[i, j, k] += w
            if extrude:
                for kk in range(k):
                    alpha[i, j, kk] += w
            lam[i, j, cls[r]] += ws


@njit(cache=True)
def vig_many(origins, dirs, t_range, blocked, info):
    """Sum of ``info`` over the voxels visible from each view (each voxel counted once).

    ``origins`` (V, 3), ``dirs`` (V, R, 3), ``info`` flat per-voxel values.
    """
    H, W, D = blocked.shape
    nv = origins.shape[0]
    nr = dirs.shape[1]
    stamp = np.zeros(H * W * D, dtype=np.int32)
    buf = np.empty(H + W + D + 4, dtype=np.int64)
    out = np.zeros(nv)
    for v in range(nv):
        s = 0.0
        tag = v + 1
        for r in range(nr):
            n, h, t = march(origins[v, 0], origins[v, 1], origins[v, 2], dirs[v, r, 0], dirs[v, r, 1], dirs[v, r, 2], t_range, blocked, buf)
            for q in range(n):
                idx = buf[q]
                if stamp[idx] != tag:
                    stamp[idx] = tag
                    s += info[idx]
        out[v] = s
    return out


@njit(cache=True)
def visible_set(origin, dirs, t_range, blocked):
    H, W, D = blocked.shape
    nr = dirs.shape[0]
    seen = np.zeros(H * W * D, dtype=np.bool_)
    buf = np.empty(H + W + D + 4, dtype=np.int64)
    for r in range(nr):
        n, h, t = march(origin[0], origin[1], origin[2], dirs[r, 0], dirs[r, 1], dirs[r, 2], t_range, blocked, buf)
        for q in range(n):
            seen[buf[q]] = True
    return np.nonzero(seen)[0]


@njit(cache=True)
def supercover_2d(y0, x0, y1, x1, H, W, out):
    """Cells (flat ``i * W + j``) crossed by the segment, including corner-touch neighbours."""
    dx = x1 - x0
    dy = y1 - y0
    j = int(math.floor(x0))
    i = int(math.floor(y0))
    jend = int(math.floor(x1))
    iend = int(math.floor(y1))
    sx = 1 if dx > 0 else (-1 if dx < 0 else 0)
    sy = 1 if dy > 0 else (-1 if dy < 0 else 0)
    if sx > 0:
        tmx = (j + 1 - x0) / dx
    elif sx < 0:
        tmx = (j - x0) / dx
    else:
        tmx = math.inf
    if sy > 0:
        tmy = (i + 1 - y0) / dy
    elif sy < 0:
        tmy = (i - y0) / dy
    else:
        tmy = math.inf
    tdx = abs(1.0 / dx) if sx != 0 else math.inf
    tdy = abs(1.0 / dy) if sy != 0 else math.inf
    n = 0
    while True:
        if 0 <= i < H and 0 <= j < W:
            out[n] = i * W + j
            n += 1
        if (i == iend and j == jend) or (tmx > 1.0 and tmy > 1.0):
            break
        if tmx < tmy:
            j += sx
            tmx += tdx
        elif tmy < tmx:
            i += sy
            tmy += tdy
        else:
            # exact corner crossing: include both side neighbours
            if 0 <= i < H and 0 <= j + sx < W:
                out[n] = i * W + j + sx
                n += 1
            if 0 <= i + sy < H and 0 <= j < W:
                out[n] = (i + sy) * W + j
                n += 1
            j += sx
            i += sy
            tmx += tdx
            tmy += tdy
    return n
