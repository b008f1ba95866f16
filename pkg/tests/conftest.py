"""Shared brute-force oracles used to verify the fast implementations."""

import numpy as np
import pytest


def circumcircle(a, b, c):
    """Exact-formula circumcenter and radius of a 2D triangle."""
    ax, ay = a
    bx, by = b
    cx, cy = c
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay)
          + (cx * cx + cy * cy) * (ay - by)) / d
    uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx)
          + (cx * cx + cy * cy) * (bx - ax)) / d
    return ux, uy, np.hypot(ax - ux, ay - uy)


def empty_circumcircle_violations(points, triangles, eps=1e-9):
    """Count points strictly inside any triangle's circumcircle (eps slack)."""
    pts = np.asarray(points, dtype=np.float64)
    violations = 0
    for (i, j, k) in triangles:
        ux, uy, r = circumcircle(pts[i], pts[j], pts[k])
        d = np.hypot(pts[:, 0] - ux, pts[:, 1] - uy)
        inside = d < r - eps
        inside[[i, j, k]] = False
        violations += int(inside.sum())
    return violations


def hull_area_2d(points):
    """Convex hull area via monotone chain + shoelace."""
    pts = sorted(map(tuple, np.asarray(points, dtype=np.float64)))

    def half(seq):
        st = []
        for p in seq:
            while len(st) >= 2 and (
                (st[-1][0] - st[-2][0]) * (p[1] - st[-2][1])
                - (st[-1][1] - st[-2][1]) * (p[0] - st[-2][0])
            ) <= 0:
                st.pop()
            st.append(p)
        return st

    hull = half(pts)[:-1] + half(pts[::-1])[:-1]
    area = 0.0
    for i in range(len(hull)):
        x1, y1 = hull[i]
        x2, y2 = hull[(i + 1) % len(hull)]
        area += x1 * y2 - x2 * y1
    return abs(area) / 2.0


def triangulation_area(points, triangles):
    pts = np.asarray(points, dtype=np.float64)
    total = 0.0
    for (i, j, k) in triangles:
        (x1, y1), (x2, y2), (x3, y3) = pts[i], pts[j], pts[k]
        total += abs((x2 - x1) * (y3 - y1) - (y2 - y1) * (x3 - x1)) / 2.0
    return total


def brute_force_nn(queries, targets):
    """O(n*m) exact nearest-neighbor distances."""
    q = np.asarray(queries, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    d2 = ((q[:, None, :] - t[None, :, :]) ** 2).sum(axis=2)
    return np.sqrt(d2.min(axis=1))


def min_pairwise_distance(points):
    pts = np.asarray(points, dtype=np.float64)
    best = np.inf
    step = 512
    for i in range(0, len(pts), step):
        chunk = pts[i:i + step]
        d2 = np.sum((chunk[:, None, :] - pts[None, :, :]) ** 2, axis=2)
        rows = np.arange(chunk.shape[0])
        d2[rows, rows + i] = np.inf
        best = min(best, float(d2.min()))
    return np.sqrt(best)


def random_rotation(rng):
    """Uniform-ish random rotation from a normalized quaternion."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    x, y, z, w = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
