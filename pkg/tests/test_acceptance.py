"""Acceptance oracles, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line with the measured quantity
and the tolerance it was judged against, then asserts.  Run with
``pytest tests/test_acceptance.py -s`` (or ``python3 tests/test_acceptance.py``)
to see the lines.
"""

from __future__ import annotations

import math
import random
import sys
import time
from fractions import Fraction

import numpy as np

from toricding import analyze, from_vertices, load_bundled
from toricding.polytope import moments
from toricding.stability import StabilityClass, random_normalized_pl, spike_slopes, uniform_bound_check
from toricding.survey import rows_to_csv, rows_to_json, run_survey
from toricding.functional import (
    PolytopeGrid,
    d_a,
    from_smooth,
    legendre_dual,
    nonlinear_term,
    pseudo_bound_probe,
    random_normalized_potential,
    ricci_density,
    scaling_family,
    smooth_potential,
    spike_sequence,
    support_integral,
    zero_potential,
)

BUNDLED = load_bundled()
EPSILONS = [1.0, 0.5, 0.25, 0.125, 0.0625]


def report(number: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {detail}"
    sys.__stdout__.write(line + "\n")
    sys.__stdout__.flush()
    assert ok, line


def _p1():
    return from_vertices([(-1,), (1,)], name="P1")


def _interval(b):
    return from_vertices([(-1,), (b,)], raw_mode=True, name=f"[-1,{b}]")


def _by_name(name):
    return next(p for p in BUNDLED if p.name == name)


def _random_spd(rng, n, scale):
    m = rng.normal(size=(n, n))
    return scale * (m @ m.T / n + 0.1 * np.eye(n))


def test_criterion_01_exact_l():
    start = time.perf_counter()
    bad = []
    for p in [*BUNDLED, _interval(2)]:
        md = moments(p)
        res = analyze(p).l.residuals(md)
        if any(r != 0 for r in res):
            bad.append((p.name, res))
    elapsed = time.perf_counter() - start
    report(1, not bad and elapsed < 1.0, f"{len(BUNDLED) + 1} polytopes, nonzero residuals {bad}, {elapsed:.3f} s (< 1 s)")


def test_criterion_02_boundary_interval():
    rep = analyze(_interval(2))
    ok = rep.l.a0 == Fraction(4, 9) and rep.l.a == (Fraction(-2, 9),) and rep.alpha == 1
    report(2, ok, f"l = {rep.l.a0} + ({rep.l.a[0]})x, alpha = {rep.alpha} (expect 4/9 - 2/9 x, 1)")


def test_criterion_03_surface_survey():
    start = time.perf_counter()
    rows, summary = run_survey(BUNDLED, jobs=1)
    elapsed = time.perf_counter() - start
    alphas = [Fraction(r.alpha) for r in rows]
    ok = len(rows) == 5 and all(a < 1 for a in alphas) and not summary.boundary_ids and elapsed < 1.0
    report(3, ok, f"alphas {[str(a) for a in alphas]}, alpha = 1 cases {summary.boundary_ids}, {elapsed:.3f} s")


def test_criterion_04_symmetric_alpha_zero():
    sym = [p for p in BUNDLED if all(b == 0 for b in moments(p).barycenter)]
    names = sorted(p.name for p in sym)
    alphas = {p.name: analyze(p).alpha for p in sym}
    ok = names == ["Bl3P2", "P1xP1", "P2"] and all(a == 0 for a in alphas.values())
    report(4, ok, f"zero-barycenter polytopes {names} with alpha {[str(alphas[n]) for n in names]}")


def test_criterion_05_closed_form_nonlinear():
    p1 = _p1()
    got1 = nonlinear_term(zero_potential(PolytopeGrid(p1, 8)), "grid")
    err1 = abs(got1 + math.log(2.0))
    p2 = _by_name("P2")
    exact = -math.log(float(support_integral(p2)))
    got2 = nonlinear_term(zero_potential(PolytopeGrid(p2, 4)), "grid")
    err2 = abs(got2 - exact)
    report(5, err1 <= 1e-8 and err2 <= 1e-6, f"P1 |N + log 2| = {err1:.2e} (1e-8); P2 |N - cone sum| = {err2:.2e} (1e-6)")


def test_criterion_06_legendre_identities():
    rng = np.random.default_rng(6)
    worst_inf = worst_scale = 0.0
    count = 0
    for p in BUNDLED:
        grid = PolytopeGrid(p, 5)
        for _ in range(20):
            u = random_normalized_potential(grid, rng)
            d = legendre_dual(u, h_xi=0.2, method="grid")
            worst_inf = max(worst_inf, abs(d.minimum + u.at_origin))
            base = {}
            for eps in (1.0, 0.5, 0.25):
                # phi_{eps u}(xi) = eps phi_u(xi / eps): on the scaled box
                # log int exp(-phi_{eps u}) = n log eps + log int exp(-eps phi_u)
                de = legendre_dual(u.scale(eps), R=eps * d.R, h_xi=eps * d.h, method="grid")
                base[eps] = p.dim * math.log(eps) + d.log_integral(eps)
                worst_scale = max(worst_scale, abs(de.log_integral() - base[eps]))
            count += 1
    ok = worst_inf <= 1e-9 and worst_scale <= 1e-6
    report(6, ok, f"{count} potentials, max |inf phi + u(0)| = {worst_inf:.2e} (1e-9), max scaling defect = {worst_scale:.2e} (1e-6)")


def test_criterion_07_backend_agreement():
    rng = np.random.default_rng(7)
    worst = 0.0
    cases = 0
    for p, N in [(_p1(), 40), (_by_name("P2"), 8), (_by_name("Bl1P2"), 8)]:
        grid = PolytopeGrid(p, N)
        for g in (0.5, 1.0):
            sp = smooth_potential(p, g, _random_spd(rng, p.dim, 0.5), rng.normal(scale=0.3, size=p.dim))
            u = from_smooth(grid, sp)
            a, b = nonlinear_term(u, "grid"), nonlinear_term(u, "cov")
            worst = max(worst, abs(a - b) / abs(b))
            cases += 1
    report(7, worst <= 1e-4, f"{cases} smooth potentials in dims 1 and 2, max relative gap = {worst:.2e} (1e-4)")


def test_criterion_08_uniform_inequality():
    violations = 0
    checked = 0
    for p in BUNDLED:
        rep = analyze(p)
        rng = random.Random(8)
        for _ in range(500):
            w = uniform_bound_check(rep, p, random_normalized_pl(p, rng))
            violations += not w.holds
            checked += 1
    report(8, violations == 0, f"{checked} random PL functions, {violations} violations (exact)")


def test_criterion_09_spike_slopes():
    widths = [Fraction(1, 10**k) for k in range(1, 8)]
    worst = 0.0
    for p in [*BUNDLED, _p1(), _interval(2), _interval(3)]:
        rep = analyze(p)
        for v in p.vertices:
            values, limit = spike_slopes(p, rep.l, v, widths)
            worst = max(worst, abs(float(values[-1] - rep.l(v))), abs(float(limit - rep.l(v))))
    rep = analyze(_interval(2))
    extremal = max(_interval(2).vertices, key=lambda v: 1 - rep.l(v) * moments(_interval(2)).volume)
    vals, lim = spike_slopes(_interval(2), rep.l, extremal, widths)
    exact_zero = lim == 0 and rep.l(extremal) == 0
    report(9, worst <= 1e-6 and exact_zero, f"max |slope - l(v)| at width 1e-7 = {worst:.2e} (1e-6); [-1,2] slope at {extremal} = {lim}")


def test_criterion_10_d_a_minimality_convexity():
    rng = np.random.default_rng(10)
    worst_drop = -math.inf
    worst_mid = -math.inf
    for p, N in [(_p1(), 20), (_by_name("P2"), 4)]:
        grid = PolytopeGrid(p, N)
        v0 = smooth_potential(p, 1.0)
        A = ricci_density(p, grid, v0)
        base = d_a(from_smooth(grid, v0), A, p)
        perturb = []
        for _ in range(50):
            w = smooth_potential(p, rng.uniform(0.0, 1.0), _random_spd(rng, p.dim, rng.uniform(0.1, 2.0)), rng.normal(size=p.dim))
            perturb.append(w)
            t = rng.uniform(0.01, 1.0)
            val = d_a(from_smooth(grid, v0.combine(w, 1.0, t)), A, p)
            worst_drop = max(worst_drop, base - val)
        for a, b in zip(perturb[::2], perturb[1::2]):
            ua, ub = v0.combine(a), v0.combine(b)
            mid = d_a(from_smooth(grid, ua.combine(ub, 0.5, 0.5)), A, p)
            ends = 0.5 * (d_a(from_smooth(grid, ua), A, p) + d_a(from_smooth(grid, ub), A, p))
            worst_mid = max(worst_mid, mid - ends)
    ok = worst_drop <= 1e-6 and worst_mid <= 1e-8
    report(10, ok, f"max D_A(v0) - D_A(v0 + t w) = {worst_drop:.2e} (1e-6), max midpoint excess = {worst_mid:.2e} (1e-8)")


def test_criterion_11_probe_behaviour():
    finite = []
    for p in BUNDLED:
        rep = analyze(p)
        assert rep.stability is StabilityClass.UNIFORM_STABLE
        fam = scaling_family(p, PolytopeGrid(p, 4), [0.25 * k for k in range(1, 9)])
        res = pseudo_bound_probe(p, rep.l, fam, EPSILONS, h_xi=0.5)
        finite.append(all(v == "FINITE" for v in res.verdicts))
    bad = _interval(3)
    rep = analyze(bad)
    fam = spike_sequence(bad, PolytopeGrid(bad, 16), 1, [1, 2, 3, 4, 6, 8, 12, 16], "1/4")
    res = pseudo_bound_probe(bad, rep.l, fam, EPSILONS)
    diverging = res.verdicts[-1] == "DIVERGING"
    ok = all(finite) and diverging and rep.alpha > 1
    report(11, ok, f"scaling families FINITE on {sum(finite)}/5 polygons; [-1,3] (alpha {rep.alpha}) spike verdicts {res.verdicts}")


def test_criterion_12_determinism():
    outputs = set()
    for jobs in (1, 2, 4, 1):
        rows, summary = run_survey(BUNDLED, jobs=jobs)
        outputs.add((rows_to_csv(rows), rows_to_json(rows, summary)))
    report(12, len(outputs) == 1, f"{len(outputs)} distinct CSV/JSON outputs over jobs 1, 2, 4 and a repeat")


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
