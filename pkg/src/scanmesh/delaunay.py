"""2D Delaunay triangulation with exact, deterministic predicates.

Bowyer-Watson insertion over coordinates quantized to a 2^44 integer grid
spanning the input's bounding box.  Point location walks the current
triangulation and the cavity is grown by adjacency flood-fill, so each
insertion touches only nearby triangles.  Orientation and in-circle tests
evaluate in float first and fall back to exact big-integer arithmetic
inside an error band, which makes the result independent of evaluation
order and platform.  Exactly cocircular ties are normalized by flipping
toward the lexicographically lowest diagonal.

The quantization displaces points by at most span * 2^-45, far below the
1e-9 circumcircle tolerance the output is verified against.
"""

from __future__ import annotations

import numpy as np

QUANT_BITS = 44
_QUANT = 1 << QUANT_BITS
# Circumradii of non-degenerate integer triples in the grid are bounded by
# diameter^3 / (4 * min_area) < 2^135; the super-triangle must sit beyond
# every such circle so its removal leaves exactly the Delaunay triangulation.
_SUPER = 1 << (QUANT_BITS + 96)

# Float-first predicates trust the sign when |det| exceeds the summed term
# magnitudes times this factor; float64 rounding error stays below 2^-50.
_FILTER = 2.0 ** -40


class DegenerateInput(ValueError):
    """Fewer than 3 distinct points, or all points collinear."""


def _orient(coords, fcoords, a: int, b: int, c: int) -> int:
    """Sign of the signed area of abc; exact fallback near zero."""
    ax, ay = fcoords[a]
    bx, by = fcoords[b]
    cx, cy = fcoords[c]
    t1 = (bx - ax) * (cy - ay)
    t2 = (by - ay) * (cx - ax)
    det = t1 - t2
    if abs(det) > (abs(t1) + abs(t2)) * _FILTER:
        return 1 if det > 0 else -1
    ax, ay = coords[a]
    bx, by = coords[b]
    cx, cy = coords[c]
    v = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    return (v > 0) - (v < 0)


def _incircle(coords, fcoords, a: int, b: int, c: int, p: int) -> int:
    """Sign > 0 iff p is strictly inside the circumcircle of CCW abc."""
    ax, ay = fcoords[a]
    bx, by = fcoords[b]
    cx, cy = fcoords[c]
    px, py = fcoords[p]
    adx = ax - px
    ady = ay - py
    bdx = bx - px
    bdy = by - py
    cdx = cx - px
    cdy = cy - py
    ad = adx * adx + ady * ady
    bd = bdx * bdx + bdy * bdy
    cd = cdx * cdx + cdy * cdy
    t1 = adx * (bdy * cd - bd * cdy)
    t2 = ady * (bdx * cd - bd * cdx)
    t3 = ad * (bdx * cdy - bdy * cdx)
    det = t1 - t2 + t3
    mag = abs(t1) + abs(t2) + abs(t3)
    if mag != np.inf and abs(det) > mag * _FILTER:
        return 1 if det > 0 else -1
    ax, ay = coords[a]
    bx, by = coords[b]
    cx, cy = coords[c]
    px, py = coords[p]
    adx = ax - px
    ady = ay - py
    bdx = bx - px
    bdy = by - py
    cdx = cx - px
    cdy = cy - py
    ad = adx * adx + ady * ady
    bd = bdx * bdx + bdy * bdy
    cd = cdx * cdx + cdy * cdy
    v = (adx * (bdy * cd - bd * cdy)
         - ady * (bdx * cd - bd * cdx)
         + ad * (bdx * cdy - bdy * cdx))
    return (v > 0) - (v < 0)


def _quantize(points: np.ndarray):
    """Snap points to the integer grid; returns int coords and kept row indices."""
    lo = points.min(axis=0)
    span = float(np.max(points.max(axis=0) - lo))
    if span <= 0.0:
        ints = np.zeros_like(points, dtype=np.int64)
    else:
        ints = np.rint((points - lo) * (_QUANT / span)).astype(np.int64)
    seen: dict[tuple[int, int], int] = {}
    keep: list[int] = []
    for i in range(ints.shape[0]):
        key = (int(ints[i, 0]), int(ints[i, 1]))
        if key not in seen:
            seen[key] = i
            keep.append(i)
    return ints, keep


def delaunay_2d(points) -> list[tuple[int, int, int]]:
    """Delaunay triangulation of 2D points; triples of input row indices.

    Output triples are index-sorted and the list is sorted, covering the
    convex hull of the distinct input points.  No input point lies strictly
    inside any output triangle's circumcircle (up to the quantization grid).
    Raises DegenerateInput for fewer than 3 distinct points or an entirely
    collinear set.  Exactly coincident points are merged onto their first
    occurrence.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("expected an (N, 2) array")
    if pts.shape[0] < 3:
        raise DegenerateInput("need at least 3 points")
    if not np.all(np.isfinite(pts)):
        raise ValueError("non-finite coordinates")

    ints, keep = _quantize(pts)
    if len(keep) < 3:
        raise DegenerateInput("fewer than 3 distinct points")

    n = len(keep)
    coords = [(int(ints[i, 0]), int(ints[i, 1])) for i in keep]
    coords += [(-_SUPER, -_SUPER), (_SUPER, -_SUPER), (0, _SUPER)]
    fcoords = [(float(x), float(y)) for x, y in coords]

    collinear = True
    for i in range(2, n):
        if _orient(coords, fcoords, 0, 1, i) != 0:
            collinear = False
            break
    if collinear:
        raise DegenerateInput("all points collinear")

    tris: dict[int, tuple[int, int, int]] = {}
    edge2tri: dict[tuple[int, int], int] = {}
    next_tid = 0

    def add_tri(a: int, b: int, c: int) -> int:
        nonlocal next_tid
        tid = next_tid
        next_tid += 1
        tris[tid] = (a, b, c)
        edge2tri[(a, b)] = tid
        edge2tri[(b, c)] = tid
        edge2tri[(c, a)] = tid
        return tid

    def drop_tri(tid: int) -> None:
        a, b, c = tris.pop(tid)
        del edge2tri[(a, b)]
        del edge2tri[(b, c)]
        del edge2tri[(c, a)]

    hint = add_tri(n, n + 1, n + 2)

    for p in range(n):
        # Visibility walk from the hint to a triangle containing p.
        tid = hint if hint in tris else next(iter(tris))
        guard = 4 * len(tris) + 16
        while True:
            guard -= 1
            if guard <= 0:
                raise RuntimeError("point location failed to terminate")
            a, b, c = tris[tid]
            if _orient(coords, fcoords, a, b, p) < 0:
                tid = edge2tri[(b, a)]
            elif _orient(coords, fcoords, b, c, p) < 0:
                tid = edge2tri[(c, b)]
            elif _orient(coords, fcoords, c, a, p) < 0:
                tid = edge2tri[(a, c)]
            else:
                break

        # Grow the cavity of triangles whose open circumdisk contains p.
        bad = {tid}
        stack = [tid]
        while stack:
            t = stack.pop()
            a, b, c = tris[t]
            for u, v in ((b, a), (c, b), (a, c)):
                nb = edge2tri.get((u, v))
                if nb is not None and nb not in bad:
                    na, nbb, nc = tris[nb]
                    if _incircle(coords, fcoords, na, nbb, nc, p) > 0:
                        bad.add(nb)
                        stack.append(nb)

        boundary: list[tuple[int, int]] = []
        for t in bad:
            a, b, c = tris[t]
            for u, v in ((a, b), (b, c), (c, a)):
                if edge2tri.get((v, u)) not in bad:
                    boundary.append((u, v))
        for t in bad:
            drop_tri(t)
        for u, v in boundary:
            hint = add_tri(u, v, p)

    triangles: set[tuple[int, int, int]] = set()
    for a, b, c in tris.values():
        if a < n and b < n and c < n:
            triangles.add(tuple(sorted((a, b, c))))

    triangles = _canonicalize_ties(triangles, coords, fcoords)
    return sorted(tuple(sorted((keep[a], keep[b], keep[c])))
                  for a, b, c in triangles)


def _canonicalize_ties(triangles: set, coords, fcoords) -> set:
    """Flip exactly-cocircular quads toward the lexicographically lowest diagonal.

    Cocircular flips preserve the Delaunay property (all four points share one
    circumcircle) and each flip strictly lowers the diagonal edge, so the
    pass terminates.
    """
    changed = True
    while changed:
        changed = False
        edge_map: dict[tuple[int, int], list] = {}
        for t in triangles:
            a, b, c = t
            for e in ((a, b), (a, c), (b, c)):
                edge_map.setdefault(e, []).append(t)
        for edge in sorted(edge_map):
            pair = edge_map[edge]
            if len(pair) != 2:
                continue
            t1, t2 = pair
            if t1 not in triangles or t2 not in triangles:
                continue
            u, v = edge
            a = next(x for x in t1 if x != u and x != v)
            b = next(x for x in t2 if x != u and x != v)
            if tuple(sorted((a, b))) >= edge:
                continue
            # Flip is valid only for a strictly convex quad.
            if _orient(coords, fcoords, a, u, b) * \
               _orient(coords, fcoords, a, v, b) >= 0:
                continue
            ca, cb, cc = t1
            if _orient(coords, fcoords, ca, cb, cc) < 0:
                cb, cc = cc, cb
            if _incircle(coords, fcoords, ca, cb, cc, b) != 0:
                continue
            triangles.discard(t1)
            triangles.discard(t2)
            triangles.add(tuple(sorted((u, a, b))))
            triangles.add(tuple(sorted((v, a, b))))
            changed = True
    return triangles
