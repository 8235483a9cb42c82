"""Polygon helpers for V-I trajectories: shoelace areas and self-intersection counting."""
from __future__ import annotations

import math

import numpy as np


def shoelace(x, y) -> float:
    """Signed area of the closed polygon through (x, y); positive when counter-clockwise."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 3:
        return 0.0
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


def _sector_crossing(p, a_prev, a_next, b_prev, b_next) -> bool:
    """Two polylines meeting at ``p`` cross (rather than touch) there."""
    base = math.atan2(a_prev[1] - p[1], a_prev[0] - p[0])

    def rel(q):
        ang = math.atan2(q[1] - p[1], q[0] - p[0]) - base
        return ang % (2.0 * math.pi)

    limit = rel(a_next)
    r1, r2 = rel(b_prev), rel(b_next)
    eps = 1e-12
    for r in (r1, r2):
        if r < eps or r > 2.0 * math.pi - eps or abs(r - limit) < eps:
            return False  # collinear branches touch without crossing
    return (r1 < limit) != (r2 < limit)


def count_self_intersections(x, y, tol: float = 1e-9) -> int:
    """Transversal crossings between non-adjacent edges of the closed polygon (x, y).

    Coordinates are normalized to the unit bounding box first, so ``tol`` is a
    fraction of span(x)*span(y). A crossing that lands on a shared vertex is
    counted once, and only if the two branches actually pass through each other.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    if n < 4:
        return 0
    sx = np.ptp(x) or 1.0
    sy = np.ptp(y) or 1.0
    px = (x - x.min()) / sx
    py = (y - y.min()) / sy
    dx = np.roll(px, -1) - px
    dy = np.roll(py, -1) - py
    length = np.hypot(dx, dy)

    a, b = np.triu_indices(n, k=2)
    keep = ~((a == 0) & (b == n - 1))
    a, b = a[keep], b[keep]

    denom = _cross(dx[a], dy[a], dx[b], dy[b])
    rx = px[b] - px[a]
    ry = py[b] - py[a]
    # near-parallel pairs (including a trajectory retracing itself) never cross transversally
    ok = np.abs(denom) > 1e-9 * length[a] * length[b]
    a, b, denom, rx, ry = a[ok], b[ok], denom[ok], rx[ok], ry[ok]
    t = _cross(rx, ry, dx[b], dy[b]) / denom
    u = _cross(rx, ry, dx[a], dy[a]) / denom

    # snap parameters that land within tol of an endpoint
    t = np.where(np.abs(t) * length[a] < tol, 0.0, t)
    t = np.where(np.abs(1.0 - t) * length[a] < tol, 1.0, t)
    u = np.where(np.abs(u) * length[b] < tol, 0.0, u)
    u = np.where(np.abs(1.0 - u) * length[b] < tol, 1.0, u)

    hit = (t >= 0.0) & (t < 1.0) & (u >= 0.0) & (u < 1.0)
    proper = hit & (t > 0.0) & (u > 0.0)
    count = int(np.count_nonzero(proper))

    pts = np.column_stack([px, py])
    for ea, eb, ta, ub in zip(a[hit & ~proper], b[hit & ~proper], t[hit & ~proper], u[hit & ~proper]):
        if ta == 0.0 and ub == 0.0:
            p = pts[ea]
            if _sector_crossing(p, pts[ea - 1], pts[(ea + 1) % n], pts[eb - 1], pts[(eb + 1) % n]):
                count += 1
        elif ta == 0.0:
            # vertex of edge a lies on the interior of edge b
            s1 = _cross(dx[eb], dy[eb], *(pts[ea - 1] - pts[eb]))
            s2 = _cross(dx[eb], dy[eb], *(pts[(ea + 1) % n] - pts[eb]))
            if s1 * s2 < 0.0:
                count += 1
        else:
            s1 = _cross(dx[ea], dy[ea], *(pts[eb - 1] - pts[ea]))
            s2 = _cross(dx[ea], dy[ea], *(pts[(eb + 1) % n] - pts[ea]))
            if s1 * s2 < 0.0:
                count += 1
    return count
