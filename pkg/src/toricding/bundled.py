"""The bundled dimension-2 database and the brute-force search that regenerates it."""

from __future__ import annotations

import math
from fractions import Fraction
from importlib import resources

from . import geometry
from .exact import primitive
from .polytope import Polytope, from_vertices, serialize
from .stability import _clip_ring

BUNDLED_FILE = "smooth_reflexive_2d.txt"

# Preferred coordinates for each equivalence class, keyed by name.
PREFERRED = {
    "P2": [(-1, -1), (2, -1), (-1, 2)],
    "P1xP1": [(-1, -1), (1, -1), (1, 1), (-1, 1)],
    "Bl1P2": [(-1, 0), (0, -1), (2, -1), (-1, 2)],
    "Bl2P2": [(-1, 0), (0, -1), (1, -1), (1, 0), (-1, 2)],
    "Bl3P2": [(-1, 0), (-1, 1), (0, 1), (1, 0), (1, -1), (0, -1)],
}


def bundled_text() -> str:
    return resources.files("toricding.data").joinpath(BUNDLED_FILE).read_text()


def load_bundled() -> list[Polytope]:
    from .survey import parse_records

    polys, diagnostics = parse_records(bundled_text(), source=BUNDLED_FILE)
    if diagnostics:
        raise RuntimeError(f"bundled database is corrupt: {diagnostics}")
    return polys


def canonical_form(p: Polytope) -> tuple[tuple[int, int], ...]:
    """Normal form of a smooth polygon under GL(2, Z).

    At a smooth vertex the two primitive edge directions form a lattice
    basis; mapping them to the standard basis (in both orders, at every
    vertex) and taking the lexicographically least vertex list gives a
    complete invariant.
    """
    if p.dim != 2 or not p.delzant_smooth:
        raise ValueError("canonical_form needs a smooth polygon")
    ring = [tuple(int(x) for x in v) for v in geometry._polygon_ccw(p.points)]
    best = None
    m = len(ring)
    for i, v in enumerate(ring):
        prev, nxt = ring[i - 1], ring[(i + 1) % m]
        d1 = primitive((nxt[0] - v[0], nxt[1] - v[1]))
        d2 = primitive((prev[0] - v[0], prev[1] - v[1]))
        for a, b in ((d1, d2), (d2, d1)):
            det = a[0] * b[1] - a[1] * b[0]
            # inverse of the column matrix [a b]
            inv = ((b[1] * det, -b[0] * det), (-a[1] * det, a[0] * det))
            image = tuple(sorted((inv[0][0] * x + inv[0][1] * y, inv[1][0] * x + inv[1][1] * y) for x, y in ring))
            if best is None or image < best:
                best = image
    return best


def _smooth_fans(normals: list[tuple[int, int]], max_edges: int):
    """Cyclic sequences of normals turning once around with unimodular neighbours.

    Consecutive facet normals of a smooth polygon form a lattice basis, so
    only sequences with ``det(nu_i, nu_{i+1}) = 1`` need to be tried.
    """
    angle = {nu: math.atan2(nu[1], nu[0]) for nu in normals}

    def turn(a, b):
        d = angle[b] - angle[a]
        return d if d > 0 else d + 2 * math.pi

    for first in normals:
        stack = [([first], 0.0)]
        while stack:
            seq, total = stack.pop()
            last = seq[-1]
            for nu in normals:
                if last[0] * nu[1] - last[1] * nu[0] != 1:
                    continue
                t = total + turn(last, nu)
                if nu == first:
                    if abs(t - 2 * math.pi) < 1e-9 and len(seq) >= 3:
                        yield list(seq)
                elif nu > first and nu not in seq and t < 2 * math.pi - 1e-9 and len(seq) < max_edges:
                    stack.append((seq + [nu], t))


def enumerate_smooth_reflexive_polygons(box: int = 2, max_edges: int = 12) -> list[Polytope]:
    """Smooth reflexive polygons up to GL(2, Z), by exhaustive search.

    Every reflexive polygon is ``{x : <nu, x> >= -1}`` for its primitive
    facet normals.  Candidate normal sets are drawn from the primitive
    vectors in ``[-box, box]^2``; a candidate is kept when every normal
    supports an edge, the polygon is bounded with lattice vertices, and it
    is Delzant smooth.  Classes are merged with :func:`canonical_form`.
    """
    normals = sorted(
        (a, b)
        for a in range(-box, box + 1)
        for b in range(-box, box + 1)
        if (a, b) != (0, 0) and primitive((a, b)) == (a, b)
    )
    big = Fraction(4 * box + 4)
    start = [tuple(Fraction(x) for x in p) for p in [(-big, -big), (big, -big), (big, big), (-big, big)]]
    classes: dict[tuple, Polytope] = {}
    for subset in _smooth_fans(normals, max_edges):
        ring = start
        for nu in subset:
            ring = _clip_ring(ring, nu, Fraction(1))
            if len(ring) < 3:
                break
        else:
            if any(abs(x) == big or x.denominator != 1 for p in ring for x in p):
                continue
            if not all(sum(1 for p in ring if p[0] * nu[0] + p[1] * nu[1] == -1) >= 2 for nu in subset):
                continue
            poly = from_vertices([tuple(int(x) for x in p) for p in ring])
            if poly.reflexive and poly.delzant_smooth:
                classes.setdefault(canonical_form(poly), poly)
    return [classes[key] for key in sorted(classes)]


def regenerate_bundled_text(box: int = 2) -> str:
    """Run the search and render the classes with their preferred names and coordinates."""
    found = enumerate_smooth_reflexive_polygons(box)
    named = {canonical_form(from_vertices(v)): name for name, v in PREFERRED.items()}
    header = (
        "# Anticanonical moment polygons of the five smooth toric del Pezzo surfaces.\n"
        "# Facets are <nu, x> >= -1 with nu the primitive ray generators of the fan.\n"
        "# Regenerate with `toricding gen-bundled`.\n"
    )
    order = list(PREFERRED)
    records = []
    for i, poly in enumerate(found):
        name = named.get(canonical_form(poly))
        if name is None:
            rep = Polytope(poly.dim, poly.vertices, poly.facets, True, True, name=f"class{i}")
            rank = len(order) + i
        else:
            rep = from_vertices(PREFERRED[name], name=name)
            rank = order.index(name)
        records.append((rank, serialize(rep)))
    records.sort(key=lambda r: r[0])
    return header + "\n" + "\n".join(text for _, text in records)
