"""Lattice polytopes: parsing, validation, triangulation and exact moments."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from . import geometry
from .exact import det, dot, int_det
from .geometry import Facet, GeometryError, Point

Simplex = tuple[Point, ...]


class PolytopeError(ValueError):
    """Malformed polytope text or a body that fails strict validation."""


@dataclass(frozen=True)
class Polytope:
    """A full-dimensional lattice polytope with both presentations.

    ``facets`` holds ``(normal, offset)`` pairs meaning
    ``<normal, x> >= -offset`` on the body, with primitive integer normals.
    """

    dim: int
    vertices: tuple[tuple[int, ...], ...]
    facets: tuple[Facet, ...]
    reflexive: bool
    delzant_smooth: bool
    raw_mode: bool = False
    name: str | None = field(default=None, compare=False)

    @property
    def points(self) -> list[Point]:
        return [tuple(Fraction(x) for x in v) for v in self.vertices]

    @property
    def origin_interior(self) -> bool:
        return all(c > 0 for _, c in self.facets)

    def facets_at(self, vertex: Sequence) -> list[Facet]:
        p = tuple(Fraction(x) for x in vertex)
        return [f for f in self.facets if geometry.tight(f, p)]

    def contains(self, x: Sequence, strict: bool = False) -> bool:
        vals = (dot(nu, x) + c for nu, c in self.facets)
        return all(v > 0 for v in vals) if strict else all(v >= 0 for v in vals)

    def transform(self, matrix: Sequence[Sequence[int]]) -> "Polytope":
        """Image under the linear map ``x -> matrix @ x`` (unimodular for lattice use)."""
        verts = [tuple(sum(r[j] * v[j] for j in range(self.dim)) for r in matrix) for v in self.vertices]
        return from_vertices(verts, raw_mode=self.raw_mode, name=self.name)


@dataclass
class ValidationReport:
    reflexive: bool
    delzant_smooth: bool
    origin_interior: bool
    interior_lattice_points: list[tuple[int, ...]]
    non_reflexive_facets: list[Facet]
    singular_vertices: list[tuple[int, ...]]
    roundtrip_ok: bool | None = None

    @property
    def ok(self) -> bool:
        only_origin = len(self.interior_lattice_points) == 1 and not any(self.interior_lattice_points[0])
        return self.reflexive and self.delzant_smooth and self.origin_interior and only_origin


@dataclass(frozen=True)
class MomentData:
    volume: Fraction
    first: tuple[Fraction, ...]
    second: tuple[tuple[Fraction, ...], ...]

    def gram(self) -> list[list[Fraction]]:
        """Gram matrix of ``1, x_1, ..., x_n`` in L^2 of the body."""
        n = len(self.first)
        rows = [[self.volume, *self.first]]
        for i in range(n):
            rows.append([self.first[i], *self.second[i]])
        return rows

    def gram_positive_definite(self) -> bool:
        g = self.gram()
        return all(det([row[:k] for row in g[:k]]) > 0 for k in range(1, len(g) + 1))

    @property
    def barycenter(self) -> tuple[Fraction, ...]:
        return tuple(m / self.volume for m in self.first)


def _smooth_vertices(dim: int, vertices, facets) -> list[tuple[int, ...]]:
    bad = []
    for v in vertices:
        p = tuple(Fraction(x) for x in v)
        normals = [f[0] for f in facets if geometry.tight(f, p)]
        if len(normals) != dim or abs(int_det(normals)) != 1:
            bad.append(v)
    return bad


def from_vertices(vertices: Sequence[Sequence[int]], raw_mode: bool = False, name: str | None = None) -> Polytope:
    """Build a polytope from lattice points; the hull's extreme points become the vertices."""
    if not vertices:
        raise PolytopeError("no vertices")
    dim = len(vertices[0])
    if dim < 1 or any(len(v) != dim for v in vertices):
        raise PolytopeError("inconsistent vertex dimensions")
    for v in vertices:
        for x in v:
            if Fraction(x).denominator != 1:
                raise PolytopeError(f"non-integer coordinate in {tuple(v)}")
    pts = geometry.to_points(vertices)
    try:
        facets = geometry.hull_facets(pts)
    except GeometryError as exc:
        raise PolytopeError(str(exc)) from exc
    extreme = geometry.extreme_points(pts, facets)
    if len(extreme) != len(set(pts)) and not raw_mode:
        inner = sorted(set(pts) - set(extreme))
        raise PolytopeError(f"points are not vertices of their hull: {[tuple(map(int, p)) for p in inner]}")
    int_vertices = tuple(sorted(tuple(int(x) for x in p) for p in extreme))
    facets = tuple(sorted((nu, Fraction(c)) for nu, c in facets))
    if not raw_mode and not all(c > 0 for _, c in facets):
        raise PolytopeError("origin is not an interior point")
    reflexive = all(c == 1 for _, c in facets)
    smooth = not _smooth_vertices(dim, int_vertices, facets)
    return Polytope(dim, int_vertices, facets, reflexive, smooth, raw_mode, name)


def _strip(line: str) -> str:
    return line.split("#", 1)[0].strip()


def parse_polytope(text: str, raw_mode: bool = False, name: str | None = None) -> Polytope:
    """Parse the ``n k`` + vertex-lines text format (or its JSON alternative)."""
    body = text.strip()
    if body.startswith("{"):
        try:
            data = json.loads(body)
            dim = int(data["dim"])
            verts = [tuple(int(x) for x in v) for v in data["vertices"]]
        except (ValueError, KeyError, TypeError) as exc:
            raise PolytopeError(f"bad JSON polytope: {exc}") from exc
        if any(len(v) != dim for v in verts):
            raise PolytopeError("vertex length does not match dim")
        return from_vertices(verts, raw_mode=raw_mode, name=data.get("id", name))
    lines = [_strip(l) for l in text.splitlines()]
    lines = [l for l in lines if l]
    if lines and lines[0].lower().startswith("id:"):
        name = lines[0][3:].strip() or name
        lines = lines[1:]
    if not lines:
        raise PolytopeError("empty polytope record")
    try:
        head = [int(x) for x in lines[0].split()]
    except ValueError as exc:
        raise PolytopeError(f"bad header line {lines[0]!r}") from exc
    if len(head) != 2 or head[0] < 1 or head[1] < 1:
        raise PolytopeError(f"header must be 'n k', got {lines[0]!r}")
    dim, k = head
    rows = lines[1:]
    if len(rows) != k:
        raise PolytopeError(f"expected {k} vertex lines, found {len(rows)}")
    verts = []
    for row in rows:
        try:
            v = tuple(int(x) for x in row.split())
        except ValueError as exc:
            raise PolytopeError(f"bad vertex line {row!r}") from exc
        if len(v) != dim:
            raise PolytopeError(f"vertex {row!r} does not have {dim} coordinates")
        verts.append(v)
    return from_vertices(verts, raw_mode=raw_mode, name=name)


def serialize(p: Polytope, with_id: bool = True) -> str:
    lines = []
    if with_id and p.name:
        lines.append(f"id: {p.name}")
    lines.append(f"{p.dim} {len(p.vertices)}")
    lines.extend(" ".join(str(x) for x in v) for v in sorted(p.vertices))
    return "\n".join(lines) + "\n"


def interior_lattice_points(p: Polytope) -> list[tuple[int, ...]]:
    lo = [min(v[i] for v in p.vertices) for i in range(p.dim)]
    hi = [max(v[i] for v in p.vertices) for i in range(p.dim)]
    ranges = [range(a + 1, b) for a, b in zip(lo, hi)]
    return [x for x in itertools.product(*ranges) if p.contains(x, strict=True)]


def roundtrip_check(p: Polytope) -> bool:
    """Facet presentation re-enumerated to vertices must give the vertex list back."""
    verts = geometry.vertices_from_inequalities(p.facets, p.dim)
    return sorted(tuple(int(x) for x in v) for v in verts) == sorted(p.vertices)


def validate(p: Polytope, roundtrip: bool = False) -> ValidationReport:
    return ValidationReport(
        reflexive=p.reflexive,
        delzant_smooth=p.delzant_smooth,
        origin_interior=p.origin_interior,
        interior_lattice_points=interior_lattice_points(p),
        non_reflexive_facets=[f for f in p.facets if f[1] != 1],
        singular_vertices=_smooth_vertices(p.dim, p.vertices, p.facets),
        roundtrip_ok=roundtrip_check(p) if roundtrip else None,
    )


def triangulate(p: Polytope) -> list[Simplex]:
    """Star triangulation from the origin over triangulated facets.

    Falls back to a pulling triangulation from the lexicographically first
    vertex when the origin is outside the body (raw mode only).
    """
    pts = p.points
    if not all(c >= 0 for _, c in p.facets):
        return geometry.triangulate(pts)
    origin = (Fraction(0),) * p.dim
    out: list[Simplex] = []
    for facet in p.facets:
        if facet[1] == 0:
            continue
        on_facet = [v for v in pts if geometry.tight(facet, v)]
        for s in geometry.triangulate(on_facet) if p.dim > 1 else [tuple(on_facet)]:
            out.append((origin,) + tuple(s))
    return out


def moments(p: Polytope, simplices: Sequence[Simplex] | None = None) -> MomentData:
    simplices = triangulate(p) if simplices is None else simplices
    vol, first, second = geometry.body_moments(simplices, p.dim)
    return MomentData(vol, tuple(first), tuple(tuple(r) for r in second))


def divergence_volume(p: Polytope) -> Fraction:
    """Volume as a sum of facet contributions ``offset * area / |normal|``.

    Each facet's (n-1)-volume is measured in its own hyperplane through the
    determinant of its edge vectors completed by the normal; no simplex of
    the star triangulation is used.
    """
    n = p.dim
    total = Fraction(0)
    for nu, c in p.facets:
        on_facet = [v for v in p.points if geometry.tight((nu, c), v)]
        pieces = geometry.triangulate(on_facet) if n > 1 else [tuple(on_facet)]
        norm2 = dot(nu, nu)
        for s in pieces:
            edges = [[a - b for a, b in zip(v, s[0])] for v in s[1:]]
            total += c * abs(det(edges + [list(nu)])) / (math.factorial(n) * norm2)
    return total
