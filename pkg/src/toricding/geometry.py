"""Exact convex-hull, vertex-enumeration and triangulation routines.

Points are tuples of ``Fraction``.  Facets are stored as ``(normal, offset)``
with the convention ``<normal, x> + offset >= 0`` on the body, ``normal`` a
primitive integer vector.  Qhull is used only to propose candidate facets;
every candidate is rebuilt and checked in exact arithmetic.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .exact import det, dot, hyperplane_normal, rank, solve

Point = tuple[Fraction, ...]
Facet = tuple[tuple[int, ...], Fraction]


class GeometryError(ValueError):
    """Degenerate or otherwise unusable geometric input."""


def to_points(rows: Iterable[Sequence]) -> list[Point]:
    return [tuple(Fraction(x) for x in row) for row in rows]


def affine_rank(points: Sequence[Point]) -> int:
    if len(points) <= 1:
        return 0
    p0 = points[0]
    return rank([[a - b for a, b in zip(p, p0)] for p in points[1:]])


def _facet_from(normal: tuple[int, ...], base: Point, points: Sequence[Point]) -> Facet | None:
    offset = -dot(normal, base)
    vals = [dot(normal, p) + offset for p in points]
    if min(vals) >= 0:
        return normal, Fraction(offset)
    if max(vals) <= 0:
        return tuple(-x for x in normal), Fraction(-offset)
    return None


def _facets_brute(points: Sequence[Point], n: int) -> list[Facet]:
    found: dict[Facet, None] = {}
    for combo in itertools.combinations(range(len(points)), n):
        p0 = points[combo[0]]
        diffs = [[a - b for a, b in zip(points[i], p0)] for i in combo[1:]]
        normal = hyperplane_normal(diffs, n)
        if normal is None:
            continue
        facet = _facet_from(normal, p0, points)
        if facet is not None:
            found.setdefault(facet)
    return list(found)


def _facets_qhull(points: Sequence[Point], n: int) -> list[Facet] | None:
    from scipy.spatial import ConvexHull, QhullError

    try:
        hull = ConvexHull(np.array([[float(x) for x in p] for p in points]))
    except (QhullError, ValueError):
        return None
    found: dict[Facet, None] = {}
    for simplex in hull.simplices:
        p0 = points[simplex[0]]
        diffs = [[a - b for a, b in zip(points[i], p0)] for i in simplex[1:]]
        normal = hyperplane_normal(diffs, n)
        if normal is None:
            return None
        facet = _facet_from(normal, p0, points)
        if facet is None:
            return None
        found.setdefault(facet)
    return list(found)


def hull_facets(points: Sequence[Point]) -> list[Facet]:
    """Facets of the convex hull of a full-dimensional rational point set."""
    pts = list(dict.fromkeys(points))
    if not pts:
        raise GeometryError("empty point set")
    n = len(pts[0])
    if affine_rank(pts) != n:
        raise GeometryError("convex hull is not full-dimensional")
    if n == 1:
        lo = min(p[0] for p in pts)
        hi = max(p[0] for p in pts)
        return [((1,), -lo), ((-1,), hi)]
    facets = None
    if len(pts) > n + 8:
        facets = _facets_qhull(pts, n)
    if facets is None:
        facets = _facets_brute(pts, n)
    return sorted(facets)


def tight(facet: Facet, p: Point) -> bool:
    return dot(facet[0], p) + facet[1] == 0


def extreme_points(points: Sequence[Point], facets: Sequence[Facet]) -> list[Point]:
    pts = list(dict.fromkeys(points))
    n = len(pts[0])
    out = []
    for p in pts:
        normals = [f[0] for f in facets if tight(f, p)]
        if len(normals) >= n and rank(normals) == n:
            out.append(p)
    return sorted(out)


def vertices_from_inequalities(constraints: Sequence[tuple[Sequence, Fraction]], n: int) -> list[Point]:
    """Vertices of ``{x : <a, x> + c >= 0}`` by brute-force enumeration.

    Intended for the small polytopes produced when clipping a polytope by a
    handful of extra half-spaces.  Returns an empty list if the region is
    empty; the result may be lower-dimensional.
    """
    cons = [(tuple(Fraction(x) for x in a), Fraction(c)) for a, c in constraints]
    found: dict[Point, None] = {}
    for combo in itertools.combinations(cons, n):
        mat = [a for a, _ in combo]
        try:
            x = solve(mat, [-c for _, c in combo])
        except ZeroDivisionError:
            continue
        if all(dot(a, x) + c >= 0 for a, c in cons):
            found.setdefault(tuple(x))
    return sorted(found)


def _projection_coords(points: Sequence[Point], d: int) -> list[int]:
    p0 = points[0]
    diffs = [[a - b for a, b in zip(p, p0)] for p in points[1:]]
    n = len(p0)
    chosen: list[int] = []
    for c in range(n):
        trial = chosen + [c]
        if rank([[row[i] for i in trial] for row in diffs]) == len(trial):
            chosen = trial
        if len(chosen) == d:
            break
    return chosen


def _polygon_ccw(points: Sequence[Point]) -> list[Point]:
    """Order the vertices of a convex polygon counter-clockwise, exactly."""
    # Andrew's monotone chain on exact coordinates.
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[Point] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[Point] = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def _triangulate_full(points: Sequence[Point]) -> list[tuple[Point, ...]]:
    d = len(points[0])
    if d == 1:
        lo, hi = min(points), max(points)
        return [(lo, hi)]
    if d == 2:
        ring = _polygon_ccw(points)
        apex = ring[0]
        return [(apex, ring[i], ring[i + 1]) for i in range(1, len(ring) - 1)]
    facets = hull_facets(points)
    verts = extreme_points(points, facets)
    apex = verts[0]
    out: list[tuple[Point, ...]] = []
    for f in facets:
        if tight(f, apex):
            continue
        on_facet = [v for v in verts if tight(f, v)]
        for simplex in triangulate(on_facet):
            out.append((apex,) + simplex)
    return out


def triangulate(points: Sequence[Point]) -> list[tuple[Point, ...]]:
    """Pulling triangulation of the convex hull of ``points``.

    The hull may be lower-dimensional; it is triangulated inside its own
    affine span (via an injective coordinate projection) and simplices are
    returned in the original coordinates.  Output order is deterministic.
    """
    pts = sorted(set(points))
    if not pts:
        return []
    d = affine_rank(pts)
    if d == 0:
        return []
    coords = _projection_coords(pts, d)
    back = {tuple(p[i] for i in coords): p for p in pts}
    projected = list(back)
    return [tuple(back[q] for q in s) for s in _triangulate_full(projected)]


def simplex_volume(simplex: Sequence[Point]) -> Fraction:
    n = len(simplex) - 1
    v0 = simplex[0]
    edges = [[a - b for a, b in zip(v, v0)] for v in simplex[1:]]
    return abs(det(edges)) / math.factorial(n)


def simplex_moments(simplex: Sequence[Point]) -> tuple[Fraction, list[Fraction], list[list[Fraction]]]:
    """Exact volume, first and second moments of a full-dimensional simplex."""
    n = len(simplex) - 1
    vol = simplex_volume(simplex)
    sums = [sum((v[i] for v in simplex), Fraction(0)) for i in range(n)]
    first = [vol * s / (n + 1) for s in sums]
    scale = vol / ((n + 1) * (n + 2))
    second = [
        [scale * (sum((v[i] * v[j] for v in simplex), Fraction(0)) + sums[i] * sums[j]) for j in range(n)]
        for i in range(n)
    ]
    return vol, first, second


def body_moments(simplices: Iterable[Sequence[Point]], n: int):
    vol = Fraction(0)
    first = [Fraction(0)] * n
    second = [[Fraction(0)] * n for _ in range(n)]
    for s in simplices:
        v, f, m = simplex_moments(s)
        vol += v
        for i in range(n):
            first[i] += f[i]
            for j in range(n):
                second[i][j] += m[i][j]
    return vol, first, second
