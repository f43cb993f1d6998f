"""The modified Ding functional, its comparison functional and the toric J-functional."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from ..polytope import Polytope, triangulate
from ..stability import AffineDensity, ding_futaki, integrate_pl
from .duality import DualPotential, legendre_dual
from .potentials import DiscretePotential, PolytopeGrid, SmoothPotential, from_smooth, smooth_potential

# Gauss points per direction of the collapsed-coordinate rule, by dimension.
GAUSS_ORDER = {1: 96, 2: 64, 3: 24}
GRADE = 4


# ---------------------------------------------------------------------------
# Quadrature over the body for integrands singular at the facets


def _graded_radial(order: int, k: int):
    """Gauss nodes for ``s`` in (0, 1) clustered at ``s = 1``: ``s = 1 - tau^k``.

    Returns ``s``, ``1 - s`` (kept exact) and the weights.
    """
    t, w = np.polynomial.legendre.leggauss(order)
    tau = 0.5 * (t + 1.0)
    return 1.0 - tau**k, tau**k, 0.5 * w * k * tau ** (k - 1)


def _graded_interval(order: int, k: int):
    """Gauss nodes in (0, 1) clustered at both ends: nodes, complements, weights."""
    t, w = np.polynomial.legendre.leggauss(order)
    th = 0.5 * (t + 1.0)
    a, b = th**k, (1.0 - th) ** k
    return a / (a + b), b / (a + b), 0.5 * w * k * (th * (1.0 - th)) ** (k - 1) / (a + b) ** 2


@dataclass(frozen=True, eq=False)
class BodyQuadrature:
    """Nodes, weights and facet distances ``l_F(x)`` (accurate near the facets)."""

    nodes: np.ndarray
    weights: np.ndarray
    ell: np.ndarray

    def integrate(self, values: np.ndarray) -> float:
        return float(self.weights @ values)


@lru_cache(maxsize=32)
def body_quadrature(p: Polytope, order: int | None = None, grade: int = GRADE) -> BodyQuadrature:
    """Gauss rule on the body, graded towards every facet.

    Each cone over a facet simplex is parametrized by a radial coordinate
    and collapsed (Duffy) coordinates on the facet simplex.  Facet
    distances are assembled from nonnegative pieces, so they keep full
    relative accuracy where ``c + <nu, x>`` would cancel.
    """
    n = p.dim
    order = order or GAUSS_ORDER.get(n, 16)
    s, one_minus_s, ws = _graded_radial(order, grade)
    w1, w1c, ww = _graded_interval(order, grade)
    normals = np.array([nu for nu, _ in p.facets], dtype=float)
    offsets = np.array([float(c) for _, c in p.facets])
    nodes, weights, ells = [], [], []
    for simplex in triangulate(p):
        if any(x != 0 for x in simplex[0]):
            raise ValueError("star quadrature needs the origin inside the body")
        P = np.array([[float(x) for x in q] for q in simplex[1:]])
        Lp = P @ normals.T + offsets  # facet distances at the facet-simplex corners (exact small rationals)
        base = np.linalg.det(np.vstack([P[0], np.diff(P, axis=0)])) if n > 1 else P[0, 0]
        idx = np.meshgrid(*([np.arange(order)] * (n - 1)), indexing="ij")
        idx = [i.reshape(-1) for i in idx]
        count = len(idx[0]) if n > 1 else 1
        lam = np.zeros((count, n))
        prod = np.ones(count)
        jac = np.ones(count)
        wprod = np.ones(count)
        for j in range(n - 1):
            lam[:, j] = prod * w1c[idx[j]]
            jac = jac * w1[idx[j]] ** (n - 2 - j)
            prod = prod * w1[idx[j]]
            wprod = wprod * ww[idx[j]]
        lam[:, n - 1] = prod
        y = lam @ P
        ell_y = lam @ Lp
        x = s[:, None, None] * y[None]
        ell = one_minus_s[:, None, None] * offsets[None, None, :] + s[:, None, None] * ell_y[None]
        wt = (ws * s ** (n - 1))[:, None] * (jac * wprod)[None] * abs(base)
        nodes.append(x.reshape(-1, n))
        weights.append(wt.reshape(-1))
        ells.append(ell.reshape(-1, len(offsets)))
    return BodyQuadrature(np.concatenate(nodes), np.concatenate(weights), np.concatenate(ells))


def grade_for(coefficient: float) -> int:
    """Grading exponent that makes ``l^(g-1)`` at least linear in the Gauss variable."""
    if coefficient <= 0:
        return GRADE
    return max(GRADE, math.ceil(2.0 / coefficient - 1e-9))


def integrate_body(p: Polytope, f: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> float:
    """``int f`` where ``f(x, ell)`` also receives the accurate facet distances."""
    q = body_quadrature(p)
    return q.integrate(f(q.nodes, q.ell))


# ---------------------------------------------------------------------------
# Nonlinear term


def log_partition_cov(sp: SmoothPotential) -> float:
    """``log int exp(-phi)`` through ``xi = grad u(x)``: ``int exp(u - <x, grad u>) det Hess u dx``."""
    if not sp.strictly_convex:
        raise ValueError("change of variables needs a strictly convex potential")
    q = body_quadrature(sp.polytope, grade=grade_for(sp.guillemin))
    logs = sp.log_volume_density(q.nodes, q.ell)
    top = logs.max()
    return float(top + math.log(q.integrate(np.exp(logs - top))))


def log_partition(u: DiscretePotential, backend: str = "auto", dual: DualPotential | None = None, **dual_kw) -> float:
    if backend == "auto":
        backend = "grid"
    if backend == "cov":
        if u.smooth is None:
            raise ValueError("the change-of-variables backend needs a closed-form potential")
        return log_partition_cov(u.smooth)
    if backend != "grid":
        raise ValueError(f"unknown backend {backend!r}")
    dual = legendre_dual(u, **dual_kw) if dual is None else dual
    return dual.log_integral()


def nonlinear_term(u: DiscretePotential, backend: str = "auto", **dual_kw) -> float:
    """``-log int exp(-(phi - inf phi))``, using ``inf phi = -u(0)``."""
    return u.at_origin - log_partition(u, backend, **dual_kw)


# ---------------------------------------------------------------------------
# Linear parts


def _linear_integral(u: DiscretePotential, weight: Callable | None, grid_weight: np.ndarray | None) -> float:
    """``int u * weight`` preferring the most exact description available."""
    if u.smooth is not None:
        sp = u.smooth
        return integrate_body(u.polytope, lambda x, ell: sp(x, ell) * (weight(x, ell) if weight is not None else 1.0))
    if grid_weight is None:
        return u.grid.integrate(u.values)
    return u.grid.integrate_product(u.values, grid_weight)


def _l_array(l: AffineDensity, x: np.ndarray) -> np.ndarray:
    return float(l.a0) + x @ np.array([float(a) for a in l.a])


def ding_linear(p: Polytope, l: AffineDensity, u: DiscretePotential) -> float:
    """``I(u) = -u(0) + int u l``; exact rationals when a PL form is attached."""
    if u.pl is not None:
        return float(ding_futaki(p, l, u.pl))
    return -u.at_origin + _linear_integral(u, lambda x, ell: _l_array(l, x), _l_array(l, u.grid.x))


def modified_ding(p: Polytope, l: AffineDensity, u: DiscretePotential, backend: str = "auto", **dual_kw) -> float:
    return nonlinear_term(u, backend, **dual_kw) + ding_linear(p, l, u)


def j_toric(p: Polytope, u: DiscretePotential) -> float:
    """``(1/|body|) int u``."""
    if u.pl is not None:
        return float(integrate_pl(p, u.pl)) / float(_volume(p))
    return _linear_integral(u, None, None) / float(_volume(p))


@lru_cache(maxsize=64)
def _volume(p: Polytope):
    from ..polytope import moments

    return moments(p).volume


@dataclass
class DingTerms:
    nonlinear: float
    linear: float
    ding: float
    j: float
    u0: float

    def to_json(self) -> dict:
        return {"D": self.ding, "I": self.linear, "J": self.j, "nonlinear": self.nonlinear, "u0": self.u0}


def ding_terms(p: Polytope, l: AffineDensity, u: DiscretePotential, backend: str = "auto", **dual_kw) -> DingTerms:
    nl = nonlinear_term(u, backend, **dual_kw)
    lin = ding_linear(p, l, u)
    return DingTerms(nl, lin, nl + lin, j_toric(p, u), u.at_origin)


# ---------------------------------------------------------------------------
# Comparison functional


@dataclass(eq=False)
class RicciDensity:
    """Pushforward of ``exp(-psi0) d xi / int exp(-psi0)`` under ``grad psi0``, as a density on the body."""

    grid: PolytopeGrid
    values: np.ndarray
    mass: float
    reference: SmoothPotential
    log_z: float

    def __call__(self, x: np.ndarray, ell: np.ndarray | None = None) -> np.ndarray:
        return np.exp(self.reference.log_volume_density(np.atleast_2d(x), ell) - self.log_z)


def ricci_density(p: Polytope, grid: PolytopeGrid, v0: SmoothPotential | DiscretePotential | None = None) -> RicciDensity:
    """Density ``A`` for the reference ``v0`` (default: facet potential with coefficient 1).

    ``A(x) = exp(v0 - <x, grad v0>) det Hess v0 / Z`` is evaluated at the grid
    nodes directly; boundary nodes are pulled inside by a relative ``1e-9``.
    """
    if v0 is None:
        v0 = smooth_potential(p, 1.0)
    if isinstance(v0, DiscretePotential):
        if v0.smooth is None:
            raise ValueError("the reference potential needs a closed form (no usable discrete Hessian)")
        v0 = v0.smooth
    if not v0.strictly_convex:
        raise ValueError("reference potential has a singular Hessian")
    log_z = log_partition_cov(v0)
    x = grid.x * (1.0 - 1e-9)
    values = np.exp(v0.log_volume_density(x) - log_z)
    return RicciDensity(grid, values, grid.integrate(values), v0, log_z)


def d_a(u: DiscretePotential, A: RicciDensity, p: Polytope, backend: str = "auto", **dual_kw) -> float:
    """``D_A(u) = -log int exp(-(phi - inf phi)) - u(0) + int u A``."""
    if backend == "auto":
        backend = "cov" if u.smooth is not None and u.smooth.strictly_convex else "grid"
    if u.grid is not A.grid and backend == "grid":
        raise ValueError("density and potential use different grids")
    if backend == "cov":
        sp = u.smooth
        lin = integrate_body(p, lambda x, ell: sp(x, ell) * A(x, ell))
        return -log_partition_cov(sp) + lin
    lin = u.grid.integrate_product(u.values, A.values)
    return -log_partition(u, "grid", **dual_kw) + lin


def reference_potential(p: Polytope, grid: PolytopeGrid, coefficient: float = 1.0) -> DiscretePotential:
    return from_smooth(grid, smooth_potential(p, coefficient), label="reference")

