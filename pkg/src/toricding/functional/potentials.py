"""Potentials on a polytope: lattice grids, smooth closed forms and grid samples."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.spatial import ConvexHull

from ..polytope import Polytope, moments
from ..stability import PiecewiseLinearConvex

GUILLEMIN_COEFFICIENT = 0.5


# ---------------------------------------------------------------------------
# Kuhn triangulations of grid cells


class GridCoverageWarning(UserWarning):
    """Raised when the simplicial cells do not tile the whole body."""


def _aligned(direction: Sequence[int], signs: Sequence[int]) -> bool:
    """Whether a hyperplane with this normal is a union of faces of the reflected Kuhn cells."""
    nz = [(i, d) for i, d in enumerate(direction) if d]
    if len(nz) == 1:
        return True
    if len(nz) != 2:
        return False
    (i, a), (j, b) = nz
    return abs(a) == abs(b) and (a > 0) * 2 - 1 == -((b > 0) * 2 - 1) * signs[i] * signs[j]


def best_sign_pattern(n: int, directions: Sequence[Sequence[int]]) -> tuple[int, ...]:
    """Reflection pattern of the Kuhn triangulation that aligns with most ``directions``.

    Kuhn cells cut the cube along ``s_i x_i - s_j x_j = const``; the first
    sign is fixed since flipping all signs gives the same triangulation.
    """
    best, score = (1,) * n, -1
    for tail in itertools.product((1, -1), repeat=n - 1):
        signs = (1,) + tail
        s = sum(_aligned(d, signs) for d in directions)
        if s > score:
            best, score = signs, s
    return best


def kuhn_offsets(n: int, signs: Sequence[int]) -> list[np.ndarray]:
    """Corner offsets (in ``{0,1}^n``) of the ``n!`` simplices of one cube."""
    start = np.array([1 if s < 0 else 0 for s in signs])
    out = []
    for perm in itertools.permutations(range(n)):
        corners = [start.copy()]
        for axis in perm:
            nxt = corners[-1].copy()
            nxt[axis] += signs[axis]
            corners.append(nxt)
        out.append(np.array(corners))
    return out


def shifted(array: np.ndarray, offset: Sequence[int]) -> np.ndarray:
    """View of ``array`` at cube corner ``offset`` for every cube of the grid."""
    return array[tuple(slice(o, s - 1 + o) for o, s in zip(offset, array.shape))]


class PolytopeGrid:
    """Lattice of spacing ``1/N`` over the bounding box of a polytope.

    Nodes are the points ``k/N`` (``k`` integer) in the closed body, decided
    exactly from the facet inequalities.  Cells are Kuhn simplices whose
    corners are all nodes; with facets aligned to the chosen reflection
    pattern they tile the body.
    """

    def __init__(self, p: Polytope, N: int, signs: Sequence[int] | None = None):
        if N < 1:
            raise ValueError("grid resolution must be a positive integer")
        self.polytope = p
        self.N = int(N)
        self.h = 1.0 / N
        n = p.dim
        verts = np.array(p.vertices, dtype=np.int64)
        self.lo = verts.min(axis=0) * N
        self.hi = verts.max(axis=0) * N
        if np.any(self.lo > 0) or np.any(self.hi < 0):
            raise ValueError("the origin is not inside the grid box")
        self.shape = tuple(int(s) for s in self.hi - self.lo + 1)
        ks = np.indices(self.shape).reshape(n, -1).T + self.lo
        inside = np.ones(len(ks), dtype=bool)
        for nu, c in p.facets:
            c = Fraction(c)
            inside &= ks @ np.array(nu, dtype=np.int64) * c.denominator + c.numerator * N >= 0
        self.index = np.full(self.shape, -1, dtype=np.int64)
        self.index.reshape(-1)[inside] = np.arange(int(inside.sum()))
        self.k = ks[inside]
        self.x = self.k / N
        self.origin = int(self.index[tuple(-self.lo)])
        self.vertex_nodes = [int(self.index[tuple(np.array(v) * N - self.lo)]) for v in p.vertices]
        self.signs = tuple(signs) if signs is not None else best_sign_pattern(n, [nu for nu, _ in p.facets])
        cells = []
        for corners in kuhn_offsets(n, self.signs):
            views = [shifted(self.index, o).reshape(-1) for o in corners]
            block = np.stack(views, axis=1)
            cells.append(block[(block >= 0).all(axis=1)])
        self.simplices = np.concatenate(cells) if cells else np.zeros((0, n + 1), dtype=np.int64)
        self.cell_volume = self.h**n / math.factorial(n)
        exact = float(moments(p).volume)
        self.coverage_defect = 1.0 - self.covered_volume / exact
        if self.coverage_defect > 1e-12:
            warnings.warn(
                f"grid cells cover only {1 - self.coverage_defect:.4f} of the body; facets are not aligned "
                "with the cell diagonals, so grid integrals are biased (a unimodular change of coordinates may help)",
                GridCoverageWarning,
                stacklevel=2,
            )

    def __len__(self) -> int:
        return len(self.x)

    @property
    def dim(self) -> int:
        return self.polytope.dim

    @cached_property
    def covered_volume(self) -> float:
        return len(self.simplices) * self.cell_volume

    @cached_property
    def lumped_weights(self) -> np.ndarray:
        w = np.zeros(len(self))
        np.add.at(w, self.simplices.reshape(-1), self.cell_volume / (self.dim + 1))
        return w

    def integrate(self, f: np.ndarray) -> float:
        """Exact integral of the piecewise-linear interpolant of ``f``."""
        return float(self.cell_volume / (self.dim + 1) * f[self.simplices].sum())

    def integrate_product(self, f: np.ndarray, g: np.ndarray) -> float:
        """Exact integral of the product of two piecewise-linear interpolants."""
        F, G = f[self.simplices], g[self.simplices]
        n = self.dim
        return float(self.cell_volume / ((n + 1) * (n + 2)) * ((F * G).sum() + (F.sum(1) * G.sum(1)).sum()))

    def product_gradient(self, g: np.ndarray) -> np.ndarray:
        """Derivative of ``integrate_product(f, g)`` with respect to each node value of ``f``."""
        G = g[self.simplices]
        n = self.dim
        contrib = self.cell_volume / ((n + 1) * (n + 2)) * (G + G.sum(1, keepdims=True))
        out = np.zeros(len(self))
        np.add.at(out, self.simplices.reshape(-1), contrib.reshape(-1))
        return out

    def dense(self, values: np.ndarray, fill: float = np.inf) -> np.ndarray:
        out = np.full(self.shape, fill)
        mask = self.index >= 0
        out[mask] = values[self.index[mask]]
        return out

    def axes(self) -> list[np.ndarray]:
        return [np.arange(a, b + 1) / self.N for a, b in zip(self.lo, self.hi)]


# ---------------------------------------------------------------------------
# Smooth potentials with closed-form derivatives


def _xlogx(t: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(t > 0, t * np.log(np.where(t > 0, t, 1.0)), 0.0)


@dataclass(frozen=True, eq=False)
class SmoothPotential:
    """``g * sum_F l_F log l_F + x.Qx/2 + b.x + c`` with ``l_F = c_F + <nu_F, x>``."""

    polytope: Polytope
    guillemin: float
    Q: np.ndarray
    b: np.ndarray
    c: float = 0.0

    def __post_init__(self):
        if self.guillemin < 0:
            raise ValueError("negative facet coefficient breaks convexity")
        if np.linalg.eigvalsh(self.Q).min() < -1e-12:
            raise ValueError("quadratic part must be positive semidefinite")

    @cached_property
    def normals(self) -> np.ndarray:
        return np.array([nu for nu, _ in self.polytope.facets], dtype=float)

    @cached_property
    def offsets(self) -> np.ndarray:
        return np.array([float(c) for _, c in self.polytope.facets])

    def facet_values(self, x: np.ndarray) -> np.ndarray:
        return np.atleast_2d(x) @ self.normals.T + self.offsets

    def _ell(self, x, ell):
        return self.facet_values(x) if ell is None else ell

    def __call__(self, x: np.ndarray, ell: np.ndarray | None = None) -> np.ndarray:
        """Values; ``ell`` may supply facet distances computed more accurately than from ``x``."""
        x = np.atleast_2d(x)
        ell = self._ell(x, ell)
        quad = 0.5 * np.einsum("pi,ij,pj->p", x, self.Q, x)
        return self.guillemin * _xlogx(ell).sum(1) + quad + x @ self.b + self.c

    def gradient(self, x: np.ndarray, ell: np.ndarray | None = None) -> np.ndarray:
        x = np.atleast_2d(x)
        ell = self._ell(x, ell)
        with np.errstate(divide="ignore"):
            logs = np.log(ell) + 1.0
        return self.guillemin * logs @ self.normals + x @ self.Q.T + self.b

    def hessian(self, x: np.ndarray, ell: np.ndarray | None = None) -> np.ndarray:
        x = np.atleast_2d(x)
        ell = self._ell(x, ell)
        nn = np.einsum("fi,fj->fij", self.normals, self.normals)
        return self.guillemin * np.einsum("pf,fij->pij", 1.0 / ell, nn) + self.Q

    def log_volume_density(self, x: np.ndarray, ell: np.ndarray | None = None) -> np.ndarray:
        """``log(exp(u - <x, grad u>) det Hess u)``, written to stay finite near facets."""
        x = np.atleast_2d(x)
        ell = self._ell(x, ell)
        g = self.guillemin
        # the b-part cancels; the facet part collapses to sum c_F log l_F - l_F + c_F
        expo = g * (self.offsets * np.log(ell) - ell + self.offsets).sum(1)
        expo += -0.5 * np.einsum("pi,ij,pj->p", x, self.Q, x) + self.c
        return expo + self.log_det_hessian(ell)

    @cached_property
    def _rank_one_terms(self):
        # Hess u = sum_k w_k v_k v_k^T over facet normals (w = g / l_F) and eigenvectors of Q
        q, vecs = np.linalg.eigh(self.Q)
        keep = q > 1e-14 * max(1.0, float(np.abs(q).max(initial=0.0)))
        V = np.vstack([self.normals, vecs[:, keep].T]) if self.guillemin > 0 else vecs[:, keep].T
        subsets, coef = [], []
        for S in itertools.combinations(range(len(V)), self.polytope.dim):
            d = np.linalg.det(V[list(S)])
            if d * d > 1e-24:
                subsets.append(S)
                coef.append(math.log(d * d))
        return np.log(q[keep]), np.array(subsets, dtype=np.int64), np.array(coef)

    def log_det_hessian(self, ell: np.ndarray) -> np.ndarray:
        """``log det Hess u`` by Cauchy-Binet; every term is nonnegative, so nothing cancels near facets."""
        log_q, subsets, coef = self._rank_one_terms
        if len(subsets) == 0:
            raise ValueError("Hessian is not positive definite")
        ell = np.atleast_2d(ell)
        with np.errstate(divide="ignore"):
            facet = math.log(self.guillemin) - np.log(ell) if self.guillemin > 0 else np.zeros((len(ell), 0))
        logw = np.hstack([facet, np.broadcast_to(log_q, (len(ell), len(log_q)))])
        terms = logw[:, subsets].sum(axis=2) + coef
        top = terms.max(axis=1, keepdims=True)
        return (top + np.log(np.exp(terms - top).sum(axis=1, keepdims=True)))[:, 0]

    def combine(self, other: "SmoothPotential", a: float = 1.0, b: float = 1.0) -> "SmoothPotential":
        if other.polytope != self.polytope:
            raise ValueError("potentials live on different polytopes")
        return SmoothPotential(
            self.polytope,
            a * self.guillemin + b * other.guillemin,
            a * self.Q + b * other.Q,
            a * self.b + b * other.b,
            a * self.c + b * other.c,
        )

    def scale(self, s: float) -> "SmoothPotential":
        if s < 0:
            raise ValueError("negative scaling breaks convexity")
        return SmoothPotential(self.polytope, s * self.guillemin, s * self.Q, s * self.b, s * self.c)

    def normalized(self) -> "SmoothPotential":
        origin = np.zeros((1, self.polytope.dim))
        g0 = self.gradient(origin)[0]
        return SmoothPotential(self.polytope, self.guillemin, self.Q, self.b - g0, self.c - float(self(origin)[0]))

    @property
    def strictly_convex(self) -> bool:
        return self.guillemin > 0 or np.linalg.eigvalsh(self.Q).min() > 0


def smooth_potential(p: Polytope, guillemin: float = GUILLEMIN_COEFFICIENT, Q=None, b=None, c: float = 0.0) -> SmoothPotential:
    n = p.dim
    Q = np.zeros((n, n)) if Q is None else np.asarray(Q, dtype=float).reshape(n, n)
    b = np.zeros(n) if b is None else np.asarray(b, dtype=float).reshape(n)
    return SmoothPotential(p, float(guillemin), Q, b, float(c))


# ---------------------------------------------------------------------------
# Grid potentials


@dataclass(eq=False)
class DiscretePotential:
    """Values of a convex function at the nodes of a :class:`PolytopeGrid`.

    ``smooth`` and ``pl`` keep an exact description when one is known, so
    that integrals can bypass the grid.
    """

    grid: PolytopeGrid
    values: np.ndarray
    normalized: bool = False
    smooth: SmoothPotential | None = None
    pl: PiecewiseLinearConvex | None = None
    label: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.grid),):
            raise ValueError("one value per grid node is required")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("potential values must be finite on the body")

    @property
    def polytope(self) -> Polytope:
        return self.grid.polytope

    @property
    def at_origin(self) -> float:
        return float(self.values[self.grid.origin])

    def vertex_values(self) -> np.ndarray:
        return self.values[self.grid.vertex_nodes]

    def scale(self, s: float) -> "DiscretePotential":
        if s < 0:
            raise ValueError("negative scaling breaks convexity")
        return DiscretePotential(
            self.grid,
            s * self.values,
            self.normalized,
            self.smooth.scale(s) if self.smooth is not None else None,
            self.pl.scale(Fraction(s)) if self.pl is not None and float(Fraction(s)) == s else None,
            f"{s:g}*{self.label}" if self.label else "",
        )

    def __add__(self, other: "DiscretePotential") -> "DiscretePotential":
        if other.grid is not self.grid:
            raise ValueError("potentials live on different grids")
        smooth = self.smooth.combine(other.smooth) if self.smooth is not None and other.smooth is not None else None
        pl = self.pl + other.pl if self.pl is not None and other.pl is not None else None
        return DiscretePotential(self.grid, self.values + other.values, self.normalized and other.normalized, smooth, pl)

    def mix(self, other: "DiscretePotential", t: float) -> "DiscretePotential":
        """``t * self + (1 - t) * other``."""
        return self.scale(t) + other.scale(1.0 - t)

    def integral(self) -> float:
        return self.grid.integrate(self.values)


def from_smooth(grid: PolytopeGrid, sp: SmoothPotential, label: str = "") -> DiscretePotential:
    vals = sp(grid.x)
    g0 = sp.gradient(np.zeros((1, grid.dim)))[0]
    normalized = abs(float(sp(np.zeros((1, grid.dim)))[0])) < 1e-14 and np.abs(g0).max() < 1e-12
    return DiscretePotential(grid, vals, normalized, smooth=sp, label=label)


def from_pl(grid: PolytopeGrid, u: PiecewiseLinearConvex, label: str = "") -> DiscretePotential:
    c0 = np.array([float(a) for a, _ in u.pieces])
    C = np.array([[float(x) for x in c] for _, c in u.pieces])
    vals = (grid.x @ C.T + c0).max(axis=1)
    return DiscretePotential(grid, vals, u.is_normalized(grid.polytope), pl=u, label=label)


def zero_potential(grid: PolytopeGrid) -> DiscretePotential:
    zero = PiecewiseLinearConvex.from_pieces([(0, (0,) * grid.dim)])
    return DiscretePotential(grid, np.zeros(len(grid)), True, smooth=smooth_potential(grid.polytope, 0.0), pl=zero, label="zero")


def guillemin_potential(p: Polytope, grid: PolytopeGrid, coefficient: float = GUILLEMIN_COEFFICIENT) -> DiscretePotential:
    """Sample ``coefficient * sum_F l_F log l_F``; boundary values by ``t log t -> 0``."""
    if grid.polytope != p:
        raise ValueError("grid belongs to a different polytope")
    if not p.origin_interior:
        raise ValueError("facet offsets must be positive (origin in the interior)")
    return from_smooth(grid, smooth_potential(p, coefficient), label="guillemin")


# ---------------------------------------------------------------------------
# Lower convex envelope and normalization


@dataclass(frozen=True)
class Envelope:
    """Lower convex envelope of grid data as a maximum of affine pieces ``<a_k, x> + b_k``."""

    slopes: np.ndarray
    intercepts: np.ndarray

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(x) @ self.slopes.T + self.intercepts).max(axis=1)

    def gradient_bound(self) -> float:
        return float(np.abs(self.slopes).max())

    def subgradient_at_origin(self, rtol: float = 1e-9) -> np.ndarray:
        """Centroid of the slopes active at the origin.

        It lies in the subdifferential and commutes with linear symmetries
        of the data, so symmetric inputs normalize without a tilt.
        """
        top = self.intercepts.max()
        scale = 1.0 + float(np.abs(self.intercepts).max()) + float(np.abs(self.slopes).max())
        active = self.slopes[self.intercepts >= top - rtol * scale]
        distinct: list[np.ndarray] = []
        for a in active:  # the piece list may hold the same plane twice up to rounding
            if all(np.abs(a - b).max() > rtol * scale for b in distinct):
                distinct.append(a)
        return np.mean(distinct, axis=0)


def _lower_chain_1d(x: np.ndarray, u: np.ndarray) -> Envelope:
    order = np.lexsort((u, x))
    hull: list[int] = []
    for i in order:
        if hull and x[hull[-1]] == x[i]:
            continue
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            # drop b when it is on or above the segment a -> i
            if (u[b] - u[a]) * (x[i] - x[a]) >= (u[i] - u[a]) * (x[b] - x[a]):
                hull.pop()
            else:
                break
        hull.append(i)
    if len(hull) == 1:
        return Envelope(np.zeros((1, 1)), np.array([u[hull[0]]]))
    xs, us = x[hull], u[hull]
    slopes = np.diff(us) / np.diff(xs)
    return Envelope(slopes[:, None], us[:-1] - slopes * xs[:-1])


def lower_envelope(x: np.ndarray, u: np.ndarray) -> Envelope:
    if x.shape[1] == 1:
        return _lower_chain_1d(x[:, 0], u)
    spread = float(u.max() - u.min())
    apex = np.concatenate([x.mean(axis=0), [u.max() + spread + 1.0]])
    hull = ConvexHull(np.vstack([np.column_stack([x, u]), apex]))
    eq = hull.equations
    n = x.shape[1]
    lower = eq[:, n] < -1e-12
    slopes = -eq[lower, :n] / eq[lower, n : n + 1]
    intercepts = -eq[lower, n + 1] / eq[lower, n]
    key = np.round(np.column_stack([slopes, intercepts]), 12)
    _, keep = np.unique(key, axis=0, return_index=True)
    keep.sort()
    return Envelope(slopes[keep], intercepts[keep])


def envelope_of(u: DiscretePotential) -> Envelope:
    return lower_envelope(u.grid.x, u.values)


def convexity_defect(u: DiscretePotential) -> float:
    """``max(u - envelope)``: zero for discretely convex data."""
    return float((u.values - envelope_of(u)(u.grid.x)).max())


def project_convex(u: DiscretePotential) -> DiscretePotential:
    """Replace the values by their lower convex envelope (exact closed forms are dropped if changed)."""
    env = envelope_of(u)(u.grid.x)
    vals = np.minimum(u.values, env)
    changed = bool(np.any(vals < u.values - 1e-13 * (1 + np.abs(u.values))))
    return DiscretePotential(
        u.grid,
        vals,
        u.normalized and not changed,
        None if changed else u.smooth,
        None if changed else u.pl,
        u.label,
    )


def normalize(u: DiscretePotential) -> DiscretePotential:
    """``u - u(0) - <g0, x>`` with ``g0`` the centroid of the envelope slopes active at 0."""
    grid = u.grid
    if grid.origin < 0:
        raise ValueError("the origin is not a grid node")
    if u.smooth is not None:
        sp = u.smooth.normalized()
        return DiscretePotential(grid, sp(grid.x), True, sp, None, u.label)
    env = envelope_of(u)
    g0 = env.subgradient_at_origin()
    vals = u.values - u.at_origin - grid.x @ g0
    vals[grid.origin] = 0.0
    pl = None
    if u.pl is not None:
        q = [Fraction(float(t)).limit_denominator(10**9) for t in g0]
        shift = u.pl.at_origin()
        pl = PiecewiseLinearConvex.from_pieces(
            [(c0 - shift, tuple(a - b for a, b in zip(c, q))) for c0, c in u.pl.pieces]
        )
        if not pl.is_normalized(grid.polytope):
            pl = None
    return DiscretePotential(grid, np.maximum(vals, 0.0), True, None, pl, u.label)


def random_normalized_potential(grid: PolytopeGrid, rng: np.random.Generator, pieces: int = 5, scale: float = 2.0) -> DiscretePotential:
    """Random convex grid data: a max of affine maps plus a random quadratic, then normalized."""
    n = grid.dim
    slopes = rng.normal(scale=scale, size=(pieces, n))
    offsets = -rng.uniform(0.0, scale, size=pieces)
    vals = np.maximum(0.0, (grid.x @ slopes.T + offsets).max(axis=1))
    m = rng.normal(size=(n, n))
    vals = vals + 0.5 * rng.uniform(0.0, scale) * np.einsum("pi,ij,pj->p", grid.x, m @ m.T / n, grid.x)
    return normalize(project_convex(DiscretePotential(grid, vals, label="random")))
