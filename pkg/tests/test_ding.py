import math

import numpy as np
import pytest

from toricding import analyze
from toricding.functional import (
    DiscretePotential,
    PolytopeGrid,
    d_a,
    ding_linear,
    ding_terms,
    from_smooth,
    j_toric,
    modified_ding,
    nonlinear_term,
    random_normalized_potential,
    reference_potential,
    ricci_density,
    smooth_potential,
    zero_potential,
)
from toricding.functional.ding import body_quadrature, integrate_body, log_partition_cov
from toricding.polytope import moments


def test_zero_potential_terms(p1):
    l = analyze(p1).l
    t = ding_terms(p1, l, zero_potential(PolytopeGrid(p1, 4)))
    assert t.nonlinear == pytest.approx(-math.log(2), abs=1e-12)
    assert t.linear == 0 and t.j == 0 and t.ding == t.nonlinear


def test_body_quadrature_volume_and_moments(bundled):
    for p in bundled.values():
        md = moments(p)
        q = body_quadrature(p)
        assert q.weights.sum() == pytest.approx(float(md.volume), rel=1e-12)
        assert q.nodes.T @ q.weights == pytest.approx([float(a) for a in md.first], abs=1e-12)
        assert np.all(q.ell > 0)


def test_backends_agree_in_one_dimension(p1, interval_m1_2):
    for p in (p1, interval_m1_2):
        u = from_smooth(PolytopeGrid(p, 16), smooth_potential(p, 0.5, [[0.4]], [0.1]))
        assert nonlinear_term(u, "grid") == pytest.approx(nonlinear_term(u, "cov"), rel=1e-9)


def test_guillemin_coefficient_one_on_interval_is_stationary(p1):
    # exp(-phi) pushes forward to the constant density 1/2 = l on [-1, 1]
    l = analyze(p1).l
    g = PolytopeGrid(p1, 8)
    u = from_smooth(g, smooth_potential(p1, 1.0))
    assert modified_ding(p1, l, u, "cov") == pytest.approx(-1.0, abs=1e-10)
    A = ricci_density(p1, g)
    assert np.allclose(A.values, 0.5, atol=1e-6)


def test_ricci_mass_near_one(bundled, interval_m1_2):
    A = ricci_density(interval_m1_2, PolytopeGrid(interval_m1_2, 66))  # 199 nodes
    assert abs(A.mass - 1.0) <= 1e-3
    for p in bundled.values():
        A = ricci_density(p, PolytopeGrid(p, 20))
        assert abs(A.mass - 1.0) <= 1e-3
        assert integrate_body(p, lambda x, ell: A(x, ell)) == pytest.approx(1.0, abs=1e-8)


def test_ricci_density_needs_closed_form(p1):
    g = PolytopeGrid(p1, 4)
    with pytest.raises(ValueError):
        ricci_density(p1, g, DiscretePotential(g, g.x[:, 0] ** 2))


@pytest.mark.parametrize("name", ["P2", "Bl1P2"])
def test_ding_invariant_under_affine_shift(bundled, name):
    p = bundled[name]
    l = analyze(p).l
    g = PolytopeGrid(p, 4)
    sp = smooth_potential(p, 0.5, np.eye(2) * 0.5)
    shifted = smooth_potential(p, 0.5, np.eye(2) * 0.5, [0.7, -0.3], 2.0)
    a = modified_ding(p, l, from_smooth(g, sp), "cov")
    b = modified_ding(p, l, from_smooth(g, shifted), "cov")
    assert a == pytest.approx(b, abs=1e-10)
    A = ricci_density(p, g)
    assert d_a(from_smooth(g, sp), A, p) == pytest.approx(d_a(from_smooth(g, shifted), A, p), abs=1e-8)


def test_grid_ding_invariant_under_affine_shift(bundled):
    p = bundled["Bl2P2"]
    l = analyze(p).l
    g = PolytopeGrid(p, 4)
    u = random_normalized_potential(g, np.random.default_rng(5))
    v = DiscretePotential(g, u.values + 1.5 + g.x @ np.array([0.25, -0.5]))
    kw = dict(h_xi=0.25, method="grid")
    assert modified_ding(p, l, u, **kw) == pytest.approx(modified_ding(p, l, v, **kw), abs=1e-10)


def test_linear_term_exact_for_pl(bundled):
    from toricding.stability import ding_futaki, spike_pl
    from toricding.functional import from_pl

    p = bundled["Bl1P2"]
    l = analyze(p).l
    s = spike_pl(p, p.vertices[1], "1/4")
    u = from_pl(PolytopeGrid(p, 4), s)
    assert ding_linear(p, l, u) == float(ding_futaki(p, l, s))
    assert j_toric(p, u) == pytest.approx(1.0 / float(moments(p).volume))


def test_cov_needs_closed_form(p1):
    g = PolytopeGrid(p1, 4)
    with pytest.raises(ValueError):
        nonlinear_term(DiscretePotential(g, g.x[:, 0] ** 2), "cov")
    with pytest.raises(ValueError):
        nonlinear_term(zero_potential(g), "simpson")


def test_reference_potential_log_partition(bundled):
    p = bundled["P1xP1"]
    u = reference_potential(p, PolytopeGrid(p, 4))
    # product of two intervals: the integral factorizes
    one = log_partition_cov(smooth_potential(__import__("toricding").from_vertices([(-1,), (1,)]), 1.0))
    assert log_partition_cov(u.smooth) == pytest.approx(2 * one, abs=1e-10)
