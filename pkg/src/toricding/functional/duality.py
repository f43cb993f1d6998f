"""Legendre duals on a box in xi-space, with an exact model of the tail outside it."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaincc

from .. import geometry
from ..exact import det, rank
from ..polytope import Polytope
from .config import DEFAULT_TOL, XI_NODE_CAP, XI_SPACING, XI_SPACING_SMOOTH, Tolerances
from .potentials import DiscretePotential, SmoothPotential, best_sign_pattern, envelope_of, kuhn_offsets, shifted

CHUNK = 1 << 17


# ---------------------------------------------------------------------------
# Exact cone geometry


def _neighbours(p: Polytope, v: tuple[int, ...]) -> list[tuple[int, ...]]:
    """Vertices joined to ``v`` by an edge."""
    if p.dim == 1:
        return [w for w in p.vertices if w != v]
    pv = tuple(Fraction(x) for x in v)
    at_v = set(p.facets_at(pv))
    out = []
    for w in p.vertices:
        if w == v:
            continue
        common = [nu for nu, c in at_v if geometry.tight((nu, c), tuple(Fraction(x) for x in w))]
        if common and rank(common) == p.dim - 1:
            out.append(w)
    return out


def _cone_constraints(p: Polytope, v: tuple[int, ...]):
    """``N_v = {xi : <v - w, xi> >= 0 for edge neighbours w}``, where ``<v, .>`` is the support function."""
    return [(tuple(a - b for a, b in zip(v, w)), Fraction(0)) for w in _neighbours(p, v)]


def _triangulated_volume(verts) -> Fraction:
    return sum((geometry.simplex_volume(s) for s in geometry.triangulate(verts)), Fraction(0))


@lru_cache(maxsize=64)
def cone_sections(p: Polytope) -> tuple[Fraction, ...]:
    """``int_{N_v} exp(-<v, xi>) d xi = n! vol(N_v and <v, xi> <= 1)`` for each vertex, exactly."""
    n = p.dim
    out = []
    for v in p.vertices:
        cons = _cone_constraints(p, v) + [(tuple(-x for x in v), Fraction(1))]
        verts = geometry.vertices_from_inequalities(cons, n)
        out.append(math.factorial(n) * _triangulated_volume(verts))
    return tuple(out)


def support_integral(p: Polytope) -> Fraction:
    """``int exp(-h(xi)) d xi`` for the support function ``h`` of the body; ``n!`` times the polar volume."""
    return sum(cone_sections(p), Fraction(0))


def support_integral_by_cones(p: Polytope) -> Fraction:
    """Same integral from simplicial normal cones: ``sum_v |det rays| / prod <v, ray>``.

    Independent of :func:`cone_sections`; needs every vertex to be simple.
    """
    total = Fraction(0)
    for v in p.vertices:
        facets = p.facets_at(v)
        if len(facets) != p.dim:
            raise ValueError(f"vertex {v} is not simple")
        rays = [tuple(-x for x in nu) for nu, _ in facets]
        pairing = [sum(a * b for a, b in zip(v, r)) for r in rays]
        total += abs(det(rays)) / math.prod(pairing)
    return total


@dataclass(frozen=True)
class ConeBox:
    """Each normal cone cut by the box ``[-R, R]^n``, triangulated (float vertices)."""

    R: Fraction
    simplices: tuple[np.ndarray, ...]  # per vertex, (S, n+1, n)
    sections: tuple[float, ...]
    reach: tuple[float, ...]  # per vertex, min of <v, xi> over the cone outside the box


@lru_cache(maxsize=64)
def cone_box(p: Polytope, R: Fraction) -> ConeBox:
    n = p.dim
    box = []
    for i in range(n):
        e = tuple(Fraction(int(i == j)) for j in range(n))
        box.append((e, R))
        box.append((tuple(-x for x in e), R))
    out, reach = [], []
    for v in p.vertices:
        verts = geometry.vertices_from_inequalities(_cone_constraints(p, v) + box, n)
        simp = [[[float(x) for x in q] for q in s] for s in geometry.triangulate(verts)]
        out.append(np.array(simp, dtype=float).reshape(-1, n + 1, n))
        # a linear function increasing along the cone is smallest outside the box at a box-face vertex
        reach.append(float(min(sum(a * b for a, b in zip(v, q)) for q in verts if max(abs(x) for x in q) == R)))
    return ConeBox(R, tuple(out), tuple(float(s) for s in cone_sections(p)), tuple(reach))


def exp_simplex_integral(simplex: np.ndarray, values: np.ndarray) -> float:
    """``int_simplex exp(-f)`` for affine ``f`` with the given vertex values.

    Uses the divided difference of ``exp(-t)`` at the vertex values, read off
    from the exponential of a bidiagonal matrix; stable for repeated values.
    """
    n = simplex.shape[0] - 1
    edges = simplex[1:] - simplex[0]
    vol_factor = abs(np.linalg.det(edges)) if n else 1.0
    J = np.diag(values) + np.diag(np.ones(n), 1)
    return float(vol_factor * (-1) ** n * expm(-J)[0, n])


# ---------------------------------------------------------------------------
# Quadrature on Kuhn cells of the xi grid


def _series_terms(spread: float) -> int:
    k = 4
    while spread**k / math.factorial(k) > 1e-18 and k < 80:
        k += 1
    return k + 1


def _complete_homogeneous(d: np.ndarray, K: int) -> list[np.ndarray]:
    """``h_k(d_0..d_q)`` for ``k = 0..K`` (``d`` has shape ``(q+1, cells)``)."""
    H = [np.ones(d.shape[1])]
    for _ in range(K):
        H.append(H[-1] * d[0])
    for j in range(1, d.shape[0]):
        for k in range(1, K + 1):
            H[k] = H[k] + d[j] * H[k - 1]
    return H


def _series(H: list[np.ndarray], q: int) -> np.ndarray:
    """``sum_k (-1)^k h_k / (q + k)!`` where ``q + 1`` points entered ``H``."""
    out = np.zeros_like(H[0])
    for k, hk in enumerate(H):
        out += (-1) ** k * hk / math.factorial(q + k)
    return out


def _cell_exp_sum(values: np.ndarray, signs, weight: float, want_grad: bool):
    """Integral of ``exp(-f)`` for the Kuhn interpolant ``f`` of dense ``values``.

    ``weight`` is ``n!`` times the cell volume.  Exact for data that is
    affine on every cell.  Optionally returns the derivative with respect
    to each node value.
    """
    n = values.ndim
    total = 0.0
    grad = np.zeros_like(values) if want_grad else None
    for corners in kuhn_offsets(n, signs):
        views = [shifted(values, o) for o in corners]
        flat = np.stack([v.reshape(-1) for v in views])
        acc = np.zeros((n + 1, flat.shape[1])) if want_grad else None
        # values are shifted to be >= 0; cells beyond exp(-60) cannot matter
        live = np.flatnonzero(flat.min(axis=0) < 60.0)
        for start in range(0, len(live), CHUNK):
            sel = live[start : start + CHUNK]
            F = flat[:, sel]
            m = F.mean(axis=0)
            d = F - m
            K = _series_terms(float(np.abs(d).max()) if d.size else 0.0)
            H = _complete_homogeneous(d, K)
            em = np.exp(-m)
            total += weight * float((em * _series(H, n)).sum())
            if want_grad:
                # d/df_i of a divided difference repeats node i
                for i in range(n + 1):
                    Hi = [H[0]]
                    for k in range(1, K + 1):
                        Hi.append(H[k] + d[i] * Hi[k - 1])
                    acc[i, sel] = -weight * em * _series(Hi, n + 1)
        if want_grad:
            for i, o in enumerate(corners):
                view = shifted(grad, o)
                view += acc[i].reshape(view.shape)
    return total, grad


def _trapezoid_weights(shape: tuple[int, ...], h: float) -> np.ndarray:
    w = np.ones(shape) * h ** len(shape)
    for axis in range(len(shape)):
        idx = [slice(None)] * len(shape)
        for end in (0, -1):
            idx[axis] = end
            w[tuple(idx)] *= 0.5
    return w


# ---------------------------------------------------------------------------
# Duals


@dataclass(eq=False)
class DualPotential:
    """``phi(xi) = sup_x (<x, xi> - u(x))`` sampled on ``h * {-M..M}^n``.

    Outside the box ``phi`` is continued by ``<v, xi> - u(v)`` on the normal
    cone of each vertex ``v``, which is exact far out and integrates in
    closed form.  ``argmax`` holds the maximizing grid node for grid duals.
    """

    source: DiscretePotential
    h: float
    M: int
    values: np.ndarray
    method: str
    argmax: np.ndarray | None = None

    @property
    def polytope(self) -> Polytope:
        return self.source.polytope

    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def R(self) -> float:
        return self.M * self.h

    @property
    def axis(self) -> np.ndarray:
        return np.arange(-self.M, self.M + 1) * self.h

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*([self.axis] * self.dim), indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    @property
    def minimum(self) -> float:
        return float(self.values.min())

    def _signs(self):
        p = self.polytope
        edges = [tuple(a - b for a, b in zip(v, w)) for v in p.vertices for w in _neighbours(p, v)]
        return best_sign_pattern(self.dim, edges)

    def _cone_box(self) -> ConeBox:
        return cone_box(self.polytope, Fraction(self.M) * Fraction(self.h))

    def tail_terms(self, scale: float = 1.0) -> np.ndarray:
        """Per-vertex ``int_{N_v outside box} exp(-s (<v, xi> - u_v + u(0)))``."""
        cb = self._cone_box()
        n = self.dim
        u0 = self.source.at_origin
        uv = self.source.vertex_values()
        out = np.zeros(len(uv))
        for i, (v, simp) in enumerate(zip(self.polytope.vertices, cb.simplices)):
            inner = sum(exp_simplex_integral(s, scale * (s @ np.array(v, dtype=float))) for s in simp)
            full = cb.sections[i] / scale**n
            # full - inner cancels badly far out; the incomplete-gamma bound caps the damage
            rest = min(max(full - inner, 0.0), full * gammaincc(n, scale * cb.reach[i]))
            out[i] = math.exp(scale * (uv[i] - u0)) * rest
        return out

    def box_integral(self, scale: float = 1.0, want_grad: bool = False):
        """``int_box exp(-s (phi + u(0)))`` and optionally its derivative in each ``phi`` node."""
        shifted_vals = scale * (self.values + self.source.at_origin)
        if self.method == "grid":
            total, grad = _cell_exp_sum(shifted_vals, self._signs(), self.h**self.dim, want_grad)
            if want_grad:
                grad *= scale
            return total, grad
        w = _trapezoid_weights(self.values.shape, self.h)
        e = w * np.exp(-shifted_vals)
        return float(e.sum()), (-scale * e if want_grad else None)

    def log_integral(self, scale: float = 1.0) -> float:
        """``log int exp(-s phi)`` over all of R^n."""
        box, _ = self.box_integral(scale)
        return scale * self.source.at_origin + math.log(box + self.tail_terms(scale).sum())

    def evaluate(self, xi: np.ndarray) -> np.ndarray:
        """``phi`` at arbitrary points, by the same rule that produced the grid values."""
        xi = np.atleast_2d(xi)
        u = self.source
        if self.method == "newton":
            return _newton_dual(u.smooth, xi, _start_points(u, xi))[0]
        out = np.empty(len(xi))
        for s in range(0, len(xi), 4096):
            blk = xi[s : s + 4096]
            out[s : s + 4096] = (blk @ u.grid.x.T - u.values).max(axis=1)
        return out


def dual_box(u: DiscretePotential, R: float | None = None, h_xi: float | None = None, tol: Tolerances = DEFAULT_TOL, smooth: bool = False) -> tuple[float, int]:
    """Spacing and half-width (in nodes) of the xi box.

    The default radius covers the gradient range of the envelope and makes
    ``exp(-(phi + u(0)))`` smaller than ``exp(-tail_decay)`` outside the box.
    """
    p = u.polytope
    n = p.dim
    table = XI_SPACING_SMOOTH if smooth else XI_SPACING
    h = float(h_xi) if h_xi is not None else table.get(n, 0.5)
    if not h > 0:
        raise ValueError("xi spacing must be positive")
    L = envelope_of(u).gradient_bound()
    if R is None:
        r_in = min(float(c) / math.sqrt(sum(x * x for x in nu)) for nu, c in p.facets)
        R = max(L, (float(u.vertex_values().max()) - u.at_origin + tol.tail_decay) / r_in)
    elif R < L:
        warnings.warn(f"xi box radius {R:g} is below the gradient range {L:g}; the tail model absorbs the rest", stacklevel=3)
    M = max(1, math.ceil(R / h - 1e-9))
    cap = XI_NODE_CAP.get(n, 61)
    if 2 * M + 1 > cap:
        M = (cap - 1) // 2
        h = R / M
    return h, M


def _separable_max(neg_u: np.ndarray, x_axes, xi: np.ndarray, prefer_high: bool = False, atol: float = 0.0):
    """``max_x (<x, xi> + neg_u(x))`` on a tensor xi grid, one axis at a time.

    Returns the values and, per axis, the arrays needed to recover the
    maximizer.  Ties go to the lowest index, or with ``prefer_high`` to the
    highest index among candidates within ``atol`` of the best.
    """
    n = neg_u.ndim
    G = neg_u
    args = [None] * n
    for k in reversed(range(n)):
        Gk = np.moveaxis(G, k, 0)
        best = np.full((len(xi),) + Gk.shape[1:], -np.inf)
        arg = np.zeros(best.shape, dtype=np.int64)
        col = xi.reshape((len(xi),) + (1,) * (Gk.ndim - 1))
        for i, xk in enumerate(x_axes[k]):
            cand = xk * col + Gk[i][None]
            better = cand >= best - atol if prefer_high else cand > best
            np.copyto(best, np.maximum(best, cand), where=better)
            arg[better] = i
        G = np.moveaxis(best, 0, k)
        args[k] = np.moveaxis(arg, 0, k)
    J = np.indices((len(xi),) * n)
    chosen = []
    for k in range(n):
        chosen.append(args[k][tuple(chosen) + tuple(J[k:])])
    return G, chosen


def _start_points(u: DiscretePotential, xi: np.ndarray) -> np.ndarray:
    """Grid maximizers pulled slightly inside the body, as Newton starting points."""
    best = np.empty(len(xi), dtype=np.int64)
    for s in range(0, len(xi), 4096):
        blk = xi[s : s + 4096]
        best[s : s + 4096] = (blk @ u.grid.x.T - u.values).argmax(axis=1)
    return u.grid.x[best] * (1.0 - 1e-3)


def _newton_dual(sp: SmoothPotential, xi: np.ndarray, x0: np.ndarray, iters: int = 100):
    """Damped Newton ascent of ``<x, xi> - u(x)`` from interior starting points.

    A point retires once its objective stops improving beyond rounding; far
    out in xi the maximizer sits closer to a vertex than floats resolve.
    """
    x = x0.copy()
    F = (x * xi).sum(1) - sp(x)
    live = np.ones(len(x), dtype=bool)
    for _ in range(iters):
        idx = np.flatnonzero(live)
        if not len(idx):
            break
        xl, xil = x[idx], xi[idx]
        g = xil - sp.gradient(xl)
        H = sp.hessian(xl)
        # facet terms near a vertex can swamp the rest; a tiny shift keeps H invertible
        H += (1e-14 * np.trace(H, axis1=1, axis2=2) + 1e-300)[:, None, None] * np.eye(H.shape[1])
        d = np.linalg.solve(H, g[..., None])[..., 0]
        dec = (g * d).sum(1)
        Fl = F[idx]
        floor = 1e-15 * (1.0 + np.abs(Fl))
        t = np.ones(len(idx))
        newF = np.full(len(idx), -np.inf)
        newx = xl.copy()
        pending = dec > floor
        for _ in range(60):
            if not pending.any():
                break
            j = np.flatnonzero(pending)
            xn = xl[j] + t[j, None] * d[j]
            ok = (sp.facet_values(xn) > 0).all(1)
            Fn = np.full(len(j), -np.inf)
            Fn[ok] = (xn[ok] * xil[j][ok]).sum(1) - sp(xn[ok])
            good = Fn >= Fl[j] + 1e-4 * t[j] * dec[j]
            newx[j[good]] = xn[good]
            newF[j[good]] = Fn[good]
            pending[j[good]] = False
            t[j[~good]] *= 0.5
        improved = newF > Fl + floor
        x[idx[improved]] = newx[improved]
        F[idx[improved]] = newF[improved]
        # converged (tiny decrement), stalled at float resolution, or line search exhausted
        live[idx[~improved | (dec < 1e-20 * (1.0 + np.abs(Fl)))]] = False
    return F, x


def high_tie_argmax(dual: DualPotential, rel: float = 1e-12) -> np.ndarray:
    """Grid maximizers with near-ties sent to the highest index instead of the lowest."""
    u = dual.source
    neg = -u.grid.dense(u.values, fill=np.inf)
    atol = rel * (1.0 + float(np.abs(u.values).max()) + dual.R)
    _, chosen = _separable_max(neg, u.grid.axes(), dual.axis, prefer_high=True, atol=atol)
    return u.grid.index[tuple(chosen)]


def legendre_dual(u: DiscretePotential, R: float | None = None, h_xi: float | None = None, method: str = "auto", tol: Tolerances = DEFAULT_TOL) -> DualPotential:
    """Dual of ``u`` on a xi box.

    ``grid``: exact dual of the piecewise-linear interpolant (max over
    nodes).  ``newton``: pointwise maximization of the closed form of a
    smooth strictly convex potential.  ``auto`` picks ``newton`` whenever
    a closed form is attached.
    """
    if method == "auto":
        method = "newton" if u.smooth is not None and u.smooth.strictly_convex else "grid"
    if method not in {"grid", "newton"}:
        raise ValueError(f"unknown dual method {method!r}")
    h, M = dual_box(u, R, h_xi, tol, smooth=method == "newton")
    n = u.grid.dim
    xi_axis = np.arange(-M, M + 1) * h
    if method == "grid":
        neg = -u.grid.dense(u.values, fill=np.inf)
        vals, chosen = _separable_max(neg, u.grid.axes(), xi_axis)
        argmax = u.grid.index[tuple(chosen)]
        return DualPotential(u, h, M, vals, "grid", argmax)
    if u.smooth is None or not u.smooth.strictly_convex:
        raise ValueError("newton duals need a smooth strictly convex potential")
    shape = (2 * M + 1,) * n
    mesh = np.meshgrid(*([xi_axis] * n), indexing="ij")
    xi = np.stack([m.reshape(-1) for m in mesh], axis=1)
    vals = np.empty(len(xi))
    # nodes where exp(-(phi + u(0))) is far below the tail budget only get a few steps
    cutoff = tol.tail_decay - u.at_origin
    for s in range(0, len(xi), CHUNK):
        blk = xi[s : s + CHUNK]
        x0 = _start_points(u, blk)
        F0 = (x0 * blk).sum(1) - u.smooth(x0)
        near = F0 < cutoff
        out = F0.copy()
        if near.any():
            out[near] = _newton_dual(u.smooth, blk[near], x0[near])[0]
        if (~near).any():
            out[~near] = _newton_dual(u.smooth, blk[~near], x0[~near], iters=4)[0]
        vals[s : s + CHUNK] = out
    return DualPotential(u, h, M, vals.reshape(shape), "newton")
