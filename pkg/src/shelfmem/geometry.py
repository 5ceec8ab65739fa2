"""Planar convex-polygon helpers used by the scene simulator.

Polygons are ``(n, 2)`` float arrays with counter-clockwise vertex order.
"""

from __future__ import annotations

import numpy as np


def box_polygon(cx: float, cy: float, sx: float, sy: float, yaw: float = 0.0) -> np.ndarray:
    hx, hy = 0.5 * sx, 0.5 * sy
    local = np.array([[-hx, -hy], [hx, -hy], [hx, hy], [-hx, hy]])
    c, s = np.cos(yaw), np.sin(yaw)
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.array([cx, cy])


def circle_polygon(cx: float, cy: float, radius: float, n: int = 16) -> np.ndarray:
    ang = 2.0 * np.pi * np.arange(n) / n
    return np.stack([cx + radius * np.cos(ang), cy + radius * np.sin(ang)], axis=1)


def polygon_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain; returns CCW hull without collinear points."""
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def minkowski_sum(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    sums = (a[:, None, :] + b[None, :, :]).reshape(-1, 2)
    return convex_hull(sums)


def _edge_normals(poly: np.ndarray) -> np.ndarray:
    edges = np.roll(poly, -1, axis=0) - poly
    return np.stack([edges[:, 1], -edges[:, 0]], axis=1)


def polygons_overlap(a: np.ndarray, b: np.ndarray, tol: float = 1e-12) -> bool:
    """Separating-axis test; touching boundaries do not count as overlap."""
    for axes in (_edge_normals(a), _edge_normals(b)):
        for n in axes:
            pa = a @ n
            pb = b @ n
            if pa.max() <= pb.min() + tol or pb.max() <= pa.min() + tol:
                return False
    return True


def points_in_polygon(poly: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Vectorised inside test for a CCW convex polygon (boundary counts as inside)."""
    pts = np.atleast_2d(pts)
    inside = np.ones(len(pts), dtype=bool)
    nxt = np.roll(poly, -1, axis=0)
    for p0, p1 in zip(poly, nxt):
        e = p1 - p0
        cr = e[0] * (pts[:, 1] - p0[1]) - e[1] * (pts[:, 0] - p0[0])
        inside &= cr >= -1e-12
    return inside


def ray_polygon_interval(poly: np.ndarray, origin: np.ndarray, d: np.ndarray):
    """Parameter interval ``[t_in, t_out]`` where ``origin + t d`` lies in the polygon.

    Returns ``None`` if the (infinite) line misses the polygon.
    """
    t_in, t_out = -np.inf, np.inf
    nxt = np.roll(poly, -1, axis=0)
    for p0, p1 in zip(poly, nxt):
        e = p1 - p0
        n = np.array([e[1], -e[0]])  # outward for CCW
        num = float(np.dot(n, p0 - origin))
        den = float(np.dot(n, d))
        if abs(den) < 1e-15:
            if num < 0:
                return None
            continue
        t = num / den
        if den > 0:
            t_out = min(t_out, t)
        else:
            t_in = max(t_in, t)
        if t_in > t_out:
            return None
    return t_in, t_out


def extent_along(poly: np.ndarray, d: np.ndarray) -> float:
    proj = poly @ d
    return float(proj.max() - proj.min())
