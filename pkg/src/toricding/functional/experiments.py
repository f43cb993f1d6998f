"""Families of potentials, the pseudo-bound probe and a projected descent minimizer."""

from __future__ import annotations

import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import partial
from typing import Sequence

import numpy as np

from ..polytope import Polytope
from ..stability import AffineDensity, StabilityClass, analyze, random_normalized_pl, spike_pl
from .config import DEFAULT_TOL, XI_NODE_CAP, Tolerances
from .ding import _volume, j_toric, modified_ding
from .duality import dual_box, high_tie_argmax, legendre_dual
from .potentials import (
    DiscretePotential,
    PolytopeGrid,
    envelope_of,
    from_pl,
    guillemin_potential,
    normalize,
    project_convex,
)

MIN_FAMILY = 8


def reference_normalized(p: Polytope, grid: PolytopeGrid, coefficient: float | None = None) -> DiscretePotential:
    """The normalized facet potential used as the base point of every family."""
    u = guillemin_potential(p, grid) if coefficient is None else guillemin_potential(p, grid, coefficient)
    return normalize(u)


# ---------------------------------------------------------------------------
# Families


def spike_family(p: Polytope, vertex: Sequence[int], K: float, width, grid: PolytopeGrid, base: DiscretePotential | None = None) -> DiscretePotential:
    """``base + K * s_w`` for the unit-mass convex spike at ``vertex``.

    The spike is built exactly and sampled; choose ``width`` so that its
    kink falls on grid lines.
    """
    if K <= 0:
        raise ValueError("spike height K must be positive")
    base = reference_normalized(p, grid) if base is None else base
    s = from_pl(grid, spike_pl(p, vertex, Fraction(width)), label="spike")
    u = base + s.scale(K)
    u.label = f"spike K={K:g}"
    return u


@dataclass
class Family:
    description: str
    params: list[float]
    members: list[DiscretePotential]

    def __post_init__(self):
        if len(self.params) != len(self.members):
            raise ValueError("one growth parameter per member")


def scaling_family(p: Polytope, grid: PolytopeGrid, ts: Sequence[float], base: DiscretePotential | None = None, coefficient: float | None = None) -> Family:
    base = reference_normalized(p, grid, coefficient) if base is None else base
    return Family("scaling t*u0", list(map(float, ts)), [base.scale(t) for t in ts])


def spike_sequence(p: Polytope, grid: PolytopeGrid, vertex_index: int, Ks: Sequence[float], width, coefficient: float | None = None) -> Family:
    v = p.vertices[vertex_index]
    base = reference_normalized(p, grid, coefficient)
    members = [spike_family(p, v, K, width, grid, base) for K in Ks]
    return Family(f"spike at {v} width {width}", list(map(float, Ks)), members)


def random_family(p: Polytope, grid: PolytopeGrid, seed: int, count: int, coefficient: float | None = None) -> Family:
    """``u0 + k * r_k`` with ``r_k`` random normalized PL functions, ``k = 1..count``."""
    rng = random.Random(seed)
    base = reference_normalized(p, grid, coefficient)
    members = []
    for k in range(1, count + 1):
        r = from_pl(grid, random_normalized_pl(p, rng))
        members.append(base + r.scale(float(k)))
    return Family(f"random seed {seed}", [float(k) for k in range(1, count + 1)], members)


# ---------------------------------------------------------------------------
# Probe


@dataclass
class ProbeResult:
    """``C_eps = max_k (-D(u_k) - eps * int u_k)`` with a trend verdict per eps (evidence only)."""

    description: str
    epsilons: list[float]
    params: list[float]
    ding: list[float]
    integrals: list[float]
    values: list[list[float]]  # per eps, per member
    C: list[float]
    slopes: list[float]
    verdicts: list[str]

    def to_json(self) -> dict:
        return {
            "family": self.description,
            "params": self.params,
            "D": self.ding,
            "int_u": self.integrals,
            "eps": [
                {"eps": e, "C_eps": c, "values": v, "tail_slope": s, "verdict": verdict}
                for e, c, v, s, verdict in zip(self.epsilons, self.C, self.values, self.slopes, self.verdicts)
            ],
        }


def _trend(params: np.ndarray, values: np.ndarray, tol: Tolerances) -> tuple[float, str]:
    running = np.maximum.accumulate(values)
    q = max(2, math.ceil(len(values) / 4))
    slope = float(np.polyfit(params[-q:], running[-q:], 1)[0])
    return slope, ("DIVERGING" if slope > tol.trend_slope else "FINITE")


def pseudo_bound_probe(
    p: Polytope,
    l: AffineDensity,
    family: Family,
    epsilons: Sequence[float],
    tol: Tolerances = DEFAULT_TOL,
    jobs: int = 1,
    **dual_kw,
) -> ProbeResult:
    if len(family.members) < MIN_FAMILY:
        raise ValueError(f"a trend verdict needs at least {MIN_FAMILY} family members, got {len(family.members)}")
    if any(not (0 < e <= 1) for e in epsilons):
        raise ValueError("epsilon values must lie in (0, 1]")
    order = np.argsort(family.params, kind="stable")
    params = np.array(family.params, dtype=float)[order]
    members = [family.members[i] for i in order]
    vol = float(_volume(p))
    evaluate = partial(modified_ding, p, l, **dual_kw)
    if jobs > 1:
        # members are independent; map keeps the family order
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            ding = list(pool.map(evaluate, members))
    else:
        ding = [evaluate(u) for u in members]
    integrals = [j_toric(p, u) * vol for u in members]
    D = np.array(ding)
    I = np.array(integrals)
    values, C, slopes, verdicts = [], [], [], []
    for e in epsilons:
        c = -D - e * I
        slope, verdict = _trend(params, c, tol)
        values.append(c.tolist())
        C.append(float(c.max()))
        slopes.append(slope)
        verdicts.append(verdict)
    return ProbeResult(family.description, list(map(float, epsilons)), params.tolist(), D.tolist(), I.tolist(), values, C, slopes, verdicts)


# ---------------------------------------------------------------------------
# Minimizer


def discrete_ding(p: Polytope, l: AffineDensity, u: DiscretePotential, h: float, M: int, want_grad: bool = False):
    """``D`` of the grid data alone (closed forms ignored) and its subgradient in the node values.

    ``D = -log int exp(-(phi + u(0))) - u(0) + int u l``.  Moving ``u_k``
    moves ``phi`` exactly on the xi nodes whose maximizer is node ``k``, and
    the tail of vertex ``v`` through ``u_v``, so the subgradient is
    ``(l-weighted mass row)_k - (dual mass attributed to k) / Z``.
    """
    grid = u.grid
    dual = legendre_dual(u, R=M * h, h_xi=h, method="grid")
    box, gphi = dual.box_integral(1.0, want_grad=want_grad)
    tails = dual.tail_terms()
    Z = box + tails.sum()
    l_nodes = float(l.a0) + grid.x @ np.array([float(a) for a in l.a])
    value = -math.log(Z) - u.at_origin + grid.integrate_product(u.values, l_nodes)
    if not want_grad:
        return value, None
    # near-tied maximizers share the dual mass, so symmetric data get a symmetric subgradient
    mass = np.zeros(len(grid))
    np.add.at(mass, dual.argmax.reshape(-1), -0.5 * gphi.reshape(-1))
    np.add.at(mass, high_tie_argmax(dual).reshape(-1), -0.5 * gphi.reshape(-1))
    np.add.at(mass, grid.vertex_nodes, tails)
    return value, grid.product_gradient(l_nodes) - mass / Z


MEMORY = 10


def _lbfgs_direction(grad: np.ndarray, weights: np.ndarray, memory) -> np.ndarray:
    q = grad.copy()
    alphas = []
    for s, y in reversed(memory):
        a = (s @ q) / (s @ y)
        alphas.append(a)
        q -= a * y
    if memory:
        s, y = memory[-1]
        gamma = (s @ y) / (y @ (y / weights))
        r = gamma * q / weights
    else:
        r = q / weights
    for (s, y), a in zip(memory, reversed(alphas)):
        r += s * (a - (y @ r) / (s @ y))
    return -r


@dataclass
class MinimizeResult:
    potential: DiscretePotential
    trace: list[float]
    steps: list[float]
    converged: bool
    flags: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"trace": self.trace, "step_sizes": self.steps, "converged": self.converged, "flags": self.flags}


def minimize_ding(
    p: Polytope,
    l: AffineDensity,
    init: DiscretePotential,
    steps: int = 50,
    step_size: float = 1.0,
    tol: Tolerances = DEFAULT_TOL,
    R: float | None = None,
    h_xi: float | None = None,
) -> MinimizeResult:
    """Projected descent on the node values.

    The search direction comes from a limited-memory BFGS recursion on the
    subgradients, seeded with the lumped node weights; each trial point is
    projected onto the lower convex envelope and renormalized, and the step
    is halved until ``D`` does not increase.  The xi box only changes when
    an iterate's gradient range outgrows it, and then the current point is
    re-evaluated so that compared values share a box.
    """
    flags = []
    report = analyze(p)
    if report.stability is not StabilityClass.UNIFORM_STABLE:
        flags.append(f"alpha = {report.alpha} >= 1: a minimizer need not exist")
    u = normalize(project_convex(DiscretePotential(init.grid, init.values, label=init.label)))
    fixed_R = R is not None
    h, M = dual_box(u, R, h_xi, tol)
    cap = (XI_NODE_CAP.get(p.dim, 61) - 1) // 2
    r_in = min(float(c) / math.sqrt(sum(x * x for x in nu)) for nu, c in p.facets)

    def needed(v: DiscretePotential) -> int:
        # outside the box exp(-(phi + u(0))) must stay below the tail budget
        if fixed_R:
            return M
        reach = (float(v.vertex_values().max()) - v.at_origin + tol.tail_decay) / r_in
        return min(cap, math.ceil(reach / h - 1e-9))

    weights = u.grid.lumped_weights
    weights = np.maximum(weights, weights[weights > 0].min())  # nodes touching no cell
    value, grad = discrete_ding(p, l, u, h, M, want_grad=True)
    trace, taken = [value], []
    eta = step_size
    converged = False
    memory: list[tuple[np.ndarray, np.ndarray]] = []
    for _ in range(steps):
        direction = _lbfgs_direction(grad, weights, memory)
        if direction @ grad >= 0:
            memory.clear()
            direction = -grad / weights
        accepted = False
        tries = 0
        while tries < 30:
            trial = normalize(project_convex(DiscretePotential(u.grid, u.values + eta * direction)))
            if needed(trial) > M:
                M = min(cap, int(math.ceil(1.25 * needed(trial))))
                value, grad = discrete_ding(p, l, u, h, M, want_grad=True)
                trace.append(value)
                memory.clear()
                direction = -grad / weights
                continue
            t_value, t_grad = discrete_ding(p, l, trial, h, M, want_grad=True)
            if t_value <= value:
                accepted = True
                break
            eta *= 0.5
            tries += 1
        if not accepted:
            converged = True  # no descent direction left at grid resolution
            break
        gain = value - t_value
        sy = (trial.values - u.values, t_grad - grad)
        if sy[0] @ sy[1] > 1e-12 * np.linalg.norm(sy[0]) * np.linalg.norm(sy[1]):
            memory.append(sy)
            del memory[:-MEMORY]
        u, value, grad = trial, t_value, t_grad
        trace.append(value)
        taken.append(eta)
        if gain <= tol.converge_rel * (1.0 + abs(value)):
            converged = True
            break
        eta = step_size
    else:
        flags.append(f"no convergence after {steps} steps; returning the last (best) iterate")
    if not fixed_R and M == cap and needed(u) >= cap:
        flags.append("xi box hit the node cap; tail budget not met")
    if flags and flags[0].startswith("alpha"):
        converged = False
    return MinimizeResult(u, trace, taken, converged, flags)
