"""The normalizing affine density, the alpha invariant and the Ding-Futaki invariant.

All quantities here are exact rationals.  Piecewise-linear convex functions
are integrated exactly by splitting the polytope into the regions where a
single affine piece is active.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

from . import geometry
from .exact import dot, solve
from .geometry import Point
from .polytope import MomentData, Polytope, moments


class StabilityClass(str, enum.Enum):
    UNIFORM_STABLE = "UNIFORM_STABLE"
    SEMISTABLE_BOUNDARY = "SEMISTABLE_BOUNDARY"
    UNSTABLE = "UNSTABLE"


@dataclass(frozen=True)
class AffineDensity:
    """``l(x) = a0 + <a, x>``."""

    a0: Fraction
    a: tuple[Fraction, ...]

    def __call__(self, x: Sequence) -> Fraction:
        return self.a0 + dot(self.a, x)

    def residuals(self, md: MomentData) -> tuple[Fraction, ...]:
        """``(int l - 1, int x_1 l, ..., int x_n l)``; all zero for the true density."""
        n = len(self.a)
        first = self.a0 * md.volume + dot(self.a, md.first) - 1
        rest = tuple(self.a0 * md.first[i] + dot(md.second[i], self.a) for i in range(n))
        return (first, *rest)

    def to_json(self) -> dict:
        return {"a0": str(self.a0), "a": [str(x) for x in self.a]}


@dataclass(frozen=True)
class StabilityReport:
    polytope_id: str | None
    dim: int
    volume: Fraction
    alpha: Fraction
    vertex_values: tuple[tuple[tuple[int, ...], Fraction], ...]
    l: AffineDensity
    stability: StabilityClass
    lambda_bound: Fraction | None

    @property
    def relative_ding_stable(self) -> bool:
        return self.alpha <= 1

    def to_json(self) -> dict:
        return {
            "polytope_id": self.polytope_id,
            "dim": self.dim,
            "volume": str(self.volume),
            "l": self.l.to_json(),
            "alpha": str(self.alpha),
            "class": self.stability.value,
            "relative_ding_stable": self.relative_ding_stable,
            "lambda_bound": None if self.lambda_bound is None else str(self.lambda_bound),
            "vertex_values": [{"vertex": list(v), "value": str(x)} for v, x in self.vertex_values],
        }

    def csv_row(self) -> list[str]:
        coeffs = " ".join(str(x) for x in (self.l.a0, *self.l.a))
        return [self.polytope_id or "", str(self.dim), str(self.volume), coeffs, str(self.alpha), self.stability.value]


CSV_HEADER = ["polytope_id", "dim", "volume", "l_coefficients", "alpha", "class"]


@dataclass(frozen=True)
class PiecewiseLinearConvex:
    """``u(x) = max_k (c0_k + <c_k, x>)`` on the closed polytope."""

    pieces: tuple[tuple[Fraction, tuple[Fraction, ...]], ...]

    @classmethod
    def from_pieces(cls, pieces) -> "PiecewiseLinearConvex":
        if not pieces:
            raise ValueError("empty piece list")
        norm = []
        for c0, c in pieces:
            norm.append((Fraction(c0), tuple(Fraction(x) for x in c)))
        return cls(tuple(dict.fromkeys(norm)))

    def __call__(self, x: Sequence) -> Fraction:
        return max(c0 + dot(c, x) for c0, c in self.pieces)

    def at_origin(self) -> Fraction:
        return max(c0 for c0, _ in self.pieces)

    def is_normalized(self, p: Polytope) -> bool:
        """``u >= u(0) = 0`` on the polytope (minimum of a convex PL map over vertices and origin)."""
        if self.at_origin() != 0:
            return False
        # u >= 0 on the body iff every piece-region has u >= 0, i.e. the
        # minimum over region vertices is >= 0.
        return all(min(self(v) for v in verts) >= 0 for _, verts in _regions(p, self))

    def __add__(self, other: "PiecewiseLinearConvex") -> "PiecewiseLinearConvex":
        pieces = [(a0 + b0, tuple(x + y for x, y in zip(a, b))) for a0, a in self.pieces for b0, b in other.pieces]
        return PiecewiseLinearConvex.from_pieces(pieces)

    def scale(self, s) -> "PiecewiseLinearConvex":
        s = Fraction(s)
        if s < 0:
            raise ValueError("negative scaling breaks convexity")
        return PiecewiseLinearConvex.from_pieces([(s * c0, tuple(s * x for x in c)) for c0, c in self.pieces])


def solve_l(md: MomentData) -> AffineDensity:
    """Unique affine ``l`` with ``-u(0) + int u l = 0`` for every affine ``u``."""
    n = len(md.first)
    rhs = [Fraction(1)] + [Fraction(0)] * n
    try:
        sol = solve(md.gram(), rhs)
    except ZeroDivisionError as exc:
        raise ValueError("singular Gram matrix: moment data is corrupted") from exc
    return AffineDensity(sol[0], tuple(sol[1:]))


def classify(alpha: Fraction) -> StabilityClass:
    if alpha < 1:
        return StabilityClass.UNIFORM_STABLE
    if alpha == 1:
        return StabilityClass.SEMISTABLE_BOUNDARY
    return StabilityClass.UNSTABLE


def alpha_invariant(p: Polytope, l: AffineDensity, md: MomentData | None = None) -> tuple[Fraction, StabilityReport]:
    """``max over the closed polytope of 1 - |P| l``, attained at a vertex."""
    md = moments(p) if md is None else md
    values = tuple((v, 1 - md.volume * l(v)) for v in p.vertices)
    alpha = max(x for _, x in values)
    cls = classify(alpha)
    lam = (1 - alpha) / md.volume if cls is StabilityClass.UNIFORM_STABLE else None
    report = StabilityReport(p.name, p.dim, md.volume, alpha, values, l, cls, lam)
    return alpha, report


def analyze(p: Polytope) -> StabilityReport:
    md = moments(p)
    return alpha_invariant(p, solve_l(md), md)[1]


def _clip_ring(ring: list[Point], a: Sequence[Fraction], c: Fraction) -> list[Point]:
    """Clip a convex polygon (ccw vertex ring) by ``<a, x> + c >= 0``."""
    out: list[Point] = []
    m = len(ring)
    for i in range(m):
        p, q = ring[i], ring[(i + 1) % m]
        fp, fq = dot(a, p) + c, dot(a, q) + c
        if fp >= 0:
            out.append(p)
        if (fp > 0 and fq < 0) or (fp < 0 and fq > 0):
            t = fp / (fp - fq)
            out.append(tuple(x + t * (y - x) for x, y in zip(p, q)))
    return list(dict.fromkeys(out))


def _region_vertices(p: Polytope, constraints) -> list[Point]:
    n = p.dim
    if n == 1:
        lo = min(v[0] for v in p.points)
        hi = max(v[0] for v in p.points)
        for a, c in constraints:
            if a[0] > 0:
                lo = max(lo, -c / a[0])
            elif a[0] < 0:
                hi = min(hi, -c / a[0])
            elif c < 0:
                return []
        return [(lo,), (hi,)] if lo < hi else []
    if n == 2:
        ring = geometry._polygon_ccw(p.points)
        for a, c in constraints:
            if not any(a) and c >= 0:
                continue
            ring = _clip_ring(ring, a, c)
            if len(ring) < 3:
                return []
        return ring
    cons = list(p.facets) + list(constraints)
    return geometry.vertices_from_inequalities(cons, n)


def _regions(p: Polytope, u: PiecewiseLinearConvex) -> Iterator[tuple[int, list[Point]]]:
    pieces = u.pieces
    for k, (c0k, ck) in enumerate(pieces):
        cons = [(tuple(x - y for x, y in zip(ck, cj)), c0k - c0j) for j, (c0j, cj) in enumerate(pieces) if j != k]
        verts = _region_vertices(p, cons)
        if len(verts) > p.dim and geometry.affine_rank(verts) == p.dim:
            yield k, verts


def _region_moments(verts: list[Point], n: int):
    return geometry.body_moments(geometry.triangulate(verts), n)


def integrate_pl(p: Polytope, u: PiecewiseLinearConvex, l: AffineDensity | None = None) -> Fraction:
    """Exact ``int u dx`` (or ``int u l dx`` when ``l`` is given)."""
    total = Fraction(0)
    for k, verts in _regions(p, u):
        c0, c = u.pieces[k]
        vol, first, second = _region_moments(verts, p.dim)
        if l is None:
            total += c0 * vol + dot(c, first)
        else:
            total += (
                c0 * l.a0 * vol
                + c0 * dot(l.a, first)
                + l.a0 * dot(c, first)
                + sum(c[i] * dot(second[i], l.a) for i in range(p.dim))
            )
    return total


def ding_futaki(p: Polytope, l: AffineDensity, u: PiecewiseLinearConvex) -> Fraction:
    """Relative Ding-Futaki invariant ``-u(0) + int u l dx``, exactly."""
    return -u.at_origin() + integrate_pl(p, u, l)


@dataclass(frozen=True)
class UniformBoundWitness:
    holds: bool
    futaki: Fraction
    bound: Fraction


def uniform_bound_check(report: StabilityReport, p: Polytope, u: PiecewiseLinearConvex) -> UniformBoundWitness:
    """Check ``I(u) >= (1 - alpha)/|P| * int u dx`` exactly for normalized ``u``."""
    if report.lambda_bound is None:
        raise ValueError("uniform bound needs alpha < 1")
    if not u.is_normalized(p):
        raise ValueError("u is not normalized (need u >= u(0) = 0)")
    lhs = ding_futaki(p, report.l, u)
    rhs = report.lambda_bound * integrate_pl(p, u)
    return UniformBoundWitness(lhs >= rhs, lhs, rhs)


def random_normalized_pl(p: Polytope, rng: random.Random, max_pieces: int = 4, max_slope: int = 3) -> PiecewiseLinearConvex:
    """Random element of the normalized PL cone: max of 0 and affine maps negative at the origin."""
    pieces = [(Fraction(0), (Fraction(0),) * p.dim)]
    for _ in range(rng.randint(1, max_pieces)):
        slope = tuple(Fraction(rng.randint(-max_slope * 2, max_slope * 2), 2) for _ in range(p.dim))
        c0 = -Fraction(rng.randint(0, 6), rng.randint(1, 4))
        pieces.append((c0, slope))
    return PiecewiseLinearConvex.from_pieces(pieces)


def spike_direction(p: Polytope, vertex: Sequence[int]) -> tuple[int, ...]:
    """A linear functional maximized over the polytope only at ``vertex``."""
    normals = [nu for nu, _ in p.facets_at(vertex)]
    if not normals:
        raise ValueError(f"{tuple(vertex)} is not a vertex")
    return tuple(-sum(nu[i] for nu in normals) for i in range(p.dim))


def spike_pl(p: Polytope, vertex: Sequence[int], width) -> PiecewiseLinearConvex:
    """Unit-mass convex PL spike supported in the cap of relative depth ``width`` at ``vertex``.

    ``s(x) = max(0, <g, x> - t) / mass`` with ``t = (1 - width) <g, v>``, so
    ``s >= 0``, ``s(0) = 0`` and ``int s = 1``.
    """
    width = Fraction(width)
    g = spike_direction(p, vertex)
    top = dot(g, vertex)
    if top <= 0:
        raise ValueError("spike support would contain the origin")
    t = (1 - width) * top
    if t <= 0:
        raise ValueError("spike support contains the origin; use a smaller width")
    raw = PiecewiseLinearConvex.from_pieces([(0, (0,) * p.dim), (-t, g)])
    mass = integrate_pl(p, raw)
    return raw.scale(1 / mass)


def spike_slopes(p: Polytope, l: AffineDensity, vertex: Sequence[int], widths: Sequence) -> tuple[list[Fraction], Fraction]:
    """``I(s_w)`` per width plus the exact ``w -> 0`` limit.

    Once the cap meets only the facets through ``vertex`` it is a homothetic
    copy of itself, so ``I(s_w)`` is affine in ``w`` and two widths give the
    limit exactly.
    """
    g = spike_direction(p, vertex)
    top = dot(g, vertex)
    others = max(dot(g, v) for v in p.vertices if tuple(v) != tuple(vertex))
    values = [ding_futaki(p, l, spike_pl(p, vertex, w)) for w in widths]
    w = Fraction(min(widths, key=Fraction))
    if (1 - 2 * w) * top <= others:
        raise ValueError("smallest width too large for exact extrapolation")
    i1 = ding_futaki(p, l, spike_pl(p, vertex, w))
    i2 = ding_futaki(p, l, spike_pl(p, vertex, 2 * w))
    return values, 2 * i1 - i2
