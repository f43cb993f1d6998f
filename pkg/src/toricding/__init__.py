"""Exact stability invariants of toric Fano polytopes and numerics for the modified Ding functional."""

from .bundled import load_bundled
from .polytope import Polytope, PolytopeError, from_vertices, moments, parse_polytope, serialize, validate
from .stability import (
    AffineDensity,
    PiecewiseLinearConvex,
    StabilityClass,
    StabilityReport,
    alpha_invariant,
    analyze,
    ding_futaki,
    integrate_pl,
    solve_l,
    spike_pl,
)
from .survey import SurveyRow, emit_report, load_database, run_survey

__version__ = "0.1.0"

__all__ = [
    "AffineDensity",
    "PiecewiseLinearConvex",
    "Polytope",
    "PolytopeError",
    "StabilityClass",
    "StabilityReport",
    "SurveyRow",
    "alpha_invariant",
    "analyze",
    "ding_futaki",
    "emit_report",
    "from_vertices",
    "integrate_pl",
    "load_bundled",
    "load_database",
    "moments",
    "parse_polytope",
    "run_survey",
    "serialize",
    "solve_l",
    "spike_pl",
    "validate",
]
