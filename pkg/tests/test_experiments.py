import math

import numpy as np
import pytest

from toricding import analyze
from toricding.functional import (
    DiscretePotential,
    Family,
    PolytopeGrid,
    discrete_ding,
    guillemin_potential,
    minimize_ding,
    normalize,
    pseudo_bound_probe,
    random_family,
    random_normalized_potential,
    scaling_family,
    spike_family,
    spike_sequence,
    zero_potential,
)
from toricding.functional.duality import dual_box

EPS = [1.0, 0.5, 0.25, 0.125, 0.0625]


def test_discrete_ding_gradient_matches_differences(bundled):
    p = bundled["Bl1P2"]
    l = analyze(p).l
    g = PolytopeGrid(p, 3)
    u = random_normalized_potential(g, np.random.default_rng(11))
    h, M = dual_box(u, h_xi=0.25)
    _, grad = discrete_ding(p, l, u, h, M, want_grad=True)
    rng = np.random.default_rng(12)
    for _ in range(3):
        d = rng.normal(size=len(g))
        step = 1e-6
        plus = discrete_ding(p, l, DiscretePotential(g, u.values + step * d), h, M)[0]
        minus = discrete_ding(p, l, DiscretePotential(g, u.values - step * d), h, M)[0]
        assert (plus - minus) / (2 * step) == pytest.approx(grad @ d, abs=1e-6)


def test_minimizer_on_interval_is_symmetric_and_descends(p1):
    l = analyze(p1).l
    g = PolytopeGrid(p1, 10)
    res = minimize_ding(p1, l, zero_potential(g), steps=60)
    assert res.converged and not res.flags
    assert all(b <= a + 1e-6 for a, b in zip(res.trace, res.trace[1:]))
    v = res.potential.values
    x = g.x[:, 0]
    mirror = np.array([v[np.argmin(np.abs(x + xi))] for xi in x])
    assert np.abs(v - mirror).max() < 1e-3
    assert res.trace[-1] == pytest.approx(-1.0, abs=5e-2)
    assert res.trace[-1] < res.trace[0]


def test_minimizer_in_two_dimensions_descends(bundled):
    p = bundled["P1xP1"]
    l = analyze(p).l
    g = PolytopeGrid(p, 3)
    res = minimize_ding(p, l, zero_potential(g), steps=4, h_xi=0.25)
    assert res.trace[-1] < res.trace[0]
    assert all(b <= a + 1e-6 for a, b in zip(res.trace, res.trace[1:]))
    assert res.to_json()["trace"] == res.trace


def test_minimizer_flags_alpha_at_least_one(interval_m1_3):
    l = analyze(interval_m1_3).l
    g = PolytopeGrid(interval_m1_3, 4)
    res = minimize_ding(interval_m1_3, l, zero_potential(g), steps=3)
    assert not res.converged
    assert any(f.startswith("alpha = 3/2") for f in res.flags)


def test_probe_requires_family_size_and_epsilon_range(p1):
    l = analyze(p1).l
    g = PolytopeGrid(p1, 8)
    small = scaling_family(p1, g, [1, 2, 3])
    with pytest.raises(ValueError, match="at least 8"):
        pseudo_bound_probe(p1, l, small, EPS)
    fam = scaling_family(p1, g, range(1, 9))
    for bad in ([0.0], [1.5], [-0.1]):
        with pytest.raises(ValueError):
            pseudo_bound_probe(p1, l, fam, bad)


def test_probe_on_interval_scaling_is_finite(p1):
    l = analyze(p1).l
    fam = scaling_family(p1, PolytopeGrid(p1, 8), [0.5 * k for k in range(1, 11)])
    res = pseudo_bound_probe(p1, l, fam, EPS)
    assert res.verdicts == ["FINITE"] * len(EPS)
    # smaller eps subtracts less, so C_eps can only grow
    assert all(a <= b + 1e-12 for a, b in zip(res.C, res.C[1:]))
    js = res.to_json()
    assert js["family"] == "scaling t*u0" and len(js["eps"]) == len(EPS)


def test_probe_parallel_matches_serial(interval_m1_2):
    l = analyze(interval_m1_2).l
    fam = spike_sequence(interval_m1_2, PolytopeGrid(interval_m1_2, 8), 1, [1, 2, 3, 4, 5, 6, 7, 8], "1/4")
    a = pseudo_bound_probe(interval_m1_2, l, fam, EPS)
    b = pseudo_bound_probe(interval_m1_2, l, fam, EPS, jobs=2)
    assert a.ding == b.ding and a.verdicts == b.verdicts


def test_spike_on_unstable_interval_diverges(interval_m1_3):
    l = analyze(interval_m1_3).l
    fam = spike_sequence(interval_m1_3, PolytopeGrid(interval_m1_3, 16), 1, [1, 2, 3, 4, 6, 8, 12, 16], "1/4")
    res = pseudo_bound_probe(interval_m1_3, l, fam, EPS)
    assert res.verdicts[-1] == "DIVERGING"
    assert res.slopes[-1] > 1e-3
    assert res.verdicts[0] == "FINITE"


def test_family_builders(bundled):
    p = bundled["P2"]
    g = PolytopeGrid(p, 3)
    fam = random_family(p, g, seed=3, count=5)
    assert fam.params == [1.0, 2.0, 3.0, 4.0, 5.0] and len(fam.members) == 5
    again = random_family(p, g, seed=3, count=5)
    assert all(np.array_equal(a.values, b.values) for a, b in zip(fam.members, again.members))
    with pytest.raises(ValueError):
        spike_family(p, p.vertices[0], 0.0, "1/4", g)
    with pytest.raises(ValueError):
        Family("bad", [1.0], [])
    base = normalize(guillemin_potential(p, g))
    u = spike_family(p, p.vertices[0], 2.0, "1/3", g, base)
    assert u.values.max() > base.values.max()
