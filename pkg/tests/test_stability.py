import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from toricding.polytope import from_vertices, moments
from toricding.stability import (
    PiecewiseLinearConvex,
    StabilityClass,
    analyze,
    classify,
    ding_futaki,
    integrate_pl,
    random_normalized_pl,
    solve_l,
    spike_pl,
    spike_slopes,
    uniform_bound_check,
)


def test_interval_boundary_case(interval_m1_2):
    rep = analyze(interval_m1_2)
    assert rep.l.a0 == Fraction(4, 9) and rep.l.a == (Fraction(-2, 9),)
    assert rep.alpha == 1 and rep.stability is StabilityClass.SEMISTABLE_BOUNDARY
    assert rep.relative_ding_stable and rep.lambda_bound is None


def test_unstable_interval(interval_m1_3):
    rep = analyze(interval_m1_3)
    assert rep.alpha == Fraction(3, 2) and rep.stability is StabilityClass.UNSTABLE


def test_bundled_alphas(bundled):
    expected = {"P2": 0, "P1xP1": 0, "Bl3P2": 0, "Bl1P2": Fraction(5, 11), "Bl2P2": Fraction(304, 409)}
    for name, a in expected.items():
        assert analyze(bundled[name]).alpha == a


def test_l_residuals_zero(bundled, interval_m1_2):
    for p in [*bundled.values(), interval_m1_2]:
        md = moments(p)
        assert all(r == 0 for r in solve_l(md).residuals(md))


def test_classify_thresholds():
    assert classify(Fraction(99, 100)) is StabilityClass.UNIFORM_STABLE
    assert classify(Fraction(1)) is StabilityClass.SEMISTABLE_BOUNDARY
    assert classify(Fraction(101, 100)) is StabilityClass.UNSTABLE


def test_affine_functions_have_zero_futaki(bundled):
    for p in bundled.values():
        l = analyze(p).l
        for c0, c in [(3, (1, -2)), (Fraction(-1, 2), (0, 5))]:
            u = PiecewiseLinearConvex.from_pieces([(c0, c)])
            assert ding_futaki(p, l, u) == 0


def test_integrate_pl_matches_cutting():
    p = from_vertices([(-1,), (1,)])
    u = PiecewiseLinearConvex.from_pieces([(0, (0,)), (0, (1,))])  # max(0, x)
    assert integrate_pl(p, u) == Fraction(1, 2)


def test_spike_properties(bundled):
    p = bundled["Bl1P2"]
    for v in p.vertices:
        s = spike_pl(p, v, Fraction(1, 4))
        assert s.is_normalized(p)
        assert integrate_pl(p, s) == 1


def test_spike_errors():
    p = from_vertices([(-1,), (1,)])
    with pytest.raises(ValueError):
        spike_pl(p, (1,), 1)  # support reaches the origin
    with pytest.raises(ValueError):
        spike_pl(p, (0,), Fraction(1, 4))


def test_spike_slopes_limits(p1, interval_m1_2, bundled):
    _, lim = spike_slopes(p1, analyze(p1).l, (1,), [Fraction(1, 8), Fraction(1, 4)])
    assert lim == Fraction(1, 2)
    rep = analyze(interval_m1_2)
    _, lim = spike_slopes(interval_m1_2, rep.l, (2,), [Fraction(1, 8)])
    assert lim == 0
    for p in bundled.values():
        rep = analyze(p)
        for v in p.vertices:
            _, lim = spike_slopes(p, rep.l, v, [Fraction(1, 16)])
            assert lim == rep.l(v)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["P2", "P1xP1", "Bl1P2", "Bl2P2", "Bl3P2"]), st.integers(0, 10**6))
def test_uniform_inequality_random_pl(bundled, name, seed):
    p = bundled[name]
    rep = analyze(p)
    u = random_normalized_pl(p, random.Random(seed))
    w = uniform_bound_check(rep, p, u)
    assert w.holds and w.futaki >= 0


def test_uniform_bound_needs_stability(interval_m1_2):
    rep = analyze(interval_m1_2)
    u = PiecewiseLinearConvex.from_pieces([(0, (0,)), (0, (1,))])
    with pytest.raises(ValueError):
        uniform_bound_check(rep, interval_m1_2, u)


def test_report_json_exact_strings(bundled):
    data = analyze(bundled["Bl2P2"]).to_json()
    assert data["alpha"] == "304/409" and data["class"] == "UNIFORM_STABLE"
