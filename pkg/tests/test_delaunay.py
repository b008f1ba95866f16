import itertools

import numpy as np
import pytest

from scanmesh.delaunay import DegenerateInput, delaunay_2d

from conftest import (empty_circumcircle_violations, hull_area_2d,
                      triangulation_area)


class TestBasics:
    def test_three_points_one_triangle(self):
        tris = delaunay_2d(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
        assert tris == [(0, 1, 2)]

    def test_unit_square_cocircular_tie(self):
        # all four corners share one circumcircle; either diagonal is a valid
        # Delaunay choice, ties resolve to the lowest-id diagonal (0, 3)
        tris = delaunay_2d(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]))
        assert len(tris) == 2
        assert tris == [(0, 1, 3), (0, 2, 3)]

    def test_too_few_points(self):
        with pytest.raises(DegenerateInput):
            delaunay_2d(np.array([[0.0, 0.0], [1.0, 0.0]]))

    def test_collinear_rejected(self):
        pts = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
        with pytest.raises(DegenerateInput):
            delaunay_2d(pts)

    def test_duplicates_merged_to_first_occurrence(self):
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        assert delaunay_2d(pts) == [(0, 1, 2)]

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            delaunay_2d(np.array([[0.0, 0.0], [np.nan, 1.0], [1.0, 0.0]]))

    def test_deterministic(self, rng):
        pts = rng.random((120, 2))
        assert delaunay_2d(pts) == delaunay_2d(pts.copy())


class TestDelaunayProperty:
    def test_empty_circumcircle_and_tiling_random(self, rng):
        for _ in range(60):
            n = int(rng.integers(3, 120))
            pts = rng.random((n, 2)) * float(rng.choice([0.5, 1.0, 20.0]))
            try:
                tris = delaunay_2d(pts)
            except DegenerateInput:
                continue
            assert empty_circumcircle_violations(pts, tris) == 0
            hull = hull_area_2d(pts)
            assert abs(triangulation_area(pts, tris) - hull) <= 1e-9 * hull

    def test_structured_grid(self):
        g = np.stack(np.meshgrid(np.arange(7.0), np.arange(5.0)), -1).reshape(-1, 2)
        tris = delaunay_2d(g)
        # grid of (7-1)*(5-1) cells, two triangles each
        assert len(tris) == 48
        assert empty_circumcircle_violations(g, tris) == 0

    def test_all_points_on_a_circle(self):
        # fully cocircular input: any triangulation of the polygon is
        # Delaunay; ties must resolve deterministically and tile the hull
        ang = 2 * np.pi * np.arange(12) / 12
        pts = np.column_stack([np.cos(ang), np.sin(ang)])
        tris = delaunay_2d(pts)
        assert len(tris) == 10
        assert tris == delaunay_2d(pts)
        hull = hull_area_2d(pts)
        assert abs(triangulation_area(pts, tris) - hull) <= 1e-9 * hull
        assert empty_circumcircle_violations(pts, tris) == 0

    def test_grid_with_interior_jitter(self, rng):
        g = np.stack(np.meshgrid(np.arange(8.0), np.arange(8.0)), -1).reshape(-1, 2)
        g += rng.normal(0, 1e-3, g.shape)
        tris = delaunay_2d(g)
        assert empty_circumcircle_violations(g, tris) == 0
        hull = hull_area_2d(g)
        assert abs(triangulation_area(g, tris) - hull) <= 1e-9 * hull

    def test_extreme_coordinate_scales(self, rng):
        for scale, offset in [(1e-6, 0.0), (1e6, 0.0), (1.0, 1e5)]:
            pts = rng.random((40, 2)) * scale + offset
            tris = delaunay_2d(pts)
            hull = hull_area_2d(pts)
            assert abs(triangulation_area(pts, tris) - hull) <= 1e-6 * hull

    def test_two_clusters_far_apart(self, rng):
        a = rng.random((15, 2))
        b = rng.random((15, 2)) + np.array([500.0, 0.0])
        pts = np.vstack([a, b])
        tris = delaunay_2d(pts)
        assert empty_circumcircle_violations(pts, tris) == 0

    def test_nearly_collinear_still_valid(self, rng):
        pts = np.zeros((30, 2))
        pts[:, 0] = np.linspace(0, 1, 30)
        pts[:, 1] = rng.normal(0, 1e-7, 30)
        try:
            tris = delaunay_2d(pts)
        except DegenerateInput:
            return
        assert empty_circumcircle_violations(pts, tris) == 0

    def test_max_min_angle_optimality_vs_flip_search(self, rng):
        # Delaunay maximizes the minimum interior angle: no triangulation
        # reachable by edge flips may have a strictly larger minimum angle.
        def min_angle(pts, tris):
            worst = 180.0
            for (i, j, k) in tris:
                a, b, c = pts[i], pts[j], pts[k]
                for p, q, r in ((a, b, c), (b, c, a), (c, a, b)):
                    v1, v2 = q - p, r - p
                    cosv = np.dot(v1, v2) / (np.linalg.norm(v1) * np.linalg.norm(v2))
                    worst = min(worst, np.degrees(np.arccos(np.clip(cosv, -1, 1))))
            return worst

        def orient(a, b, c):
            return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

        def flips(pts, tris):
            tri_set = set(tris)
            edge_map = {}
            for t in tri_set:
                for e in itertools.combinations(t, 2):
                    edge_map.setdefault(e, []).append(t)
            for e, pair in edge_map.items():
                if len(pair) != 2:
                    continue
                t1, t2 = pair
                u, v = e
                a = next(x for x in t1 if x not in e)
                b = next(x for x in t2 if x not in e)
                if orient(pts[a], pts[u], pts[b]) * orient(pts[a], pts[v], pts[b]) >= 0:
                    continue
                out = set(tri_set)
                out.discard(t1)
                out.discard(t2)
                out.add(tuple(sorted((u, a, b))))
                out.add(tuple(sorted((v, a, b))))
                yield frozenset(out)

        for _ in range(15):
            n = int(rng.integers(4, 10))
            pts = rng.random((n, 2))
            try:
                ours = delaunay_2d(pts)
            except DegenerateInput:
                continue
            ours_angle = min_angle(pts, ours)
            seen = {frozenset(ours)}
            frontier = [frozenset(ours)]
            while frontier and len(seen) < 2000:
                current = frontier.pop()
                for alt in flips(pts, list(current)):
                    if alt not in seen:
                        seen.add(alt)
                        frontier.append(alt)
                        assert min_angle(pts, list(alt)) <= ours_angle + 1e-9
