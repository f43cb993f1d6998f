"""Command-line front end.

Exit codes: 0 for stable or informational results, 1 for errors, 2 when an
unstable polytope (alpha > 1) is found.  JSON goes to stdout (or ``--out``);
a short human summary goes to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .bundled import BUNDLED_FILE, bundled_text, load_bundled, regenerate_bundled_text
from .polytope import Polytope, PolytopeError, parse_polytope
from .stability import PiecewiseLinearConvex, StabilityClass, analyze
from .survey import DatabaseError, default_jobs, emit_report, load_database, rows_to_csv, rows_to_json, run_survey

EXIT_OK, EXIT_ERROR, EXIT_UNSTABLE = 0, 1, 2

log = logging.getLogger("toricding")


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with 1: code 2 is reserved for unstable results."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# Argument helpers


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value > 0 or not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _epsilon(text: str) -> float:
    value = _positive_float(text)
    if value > 1:
        raise argparse.ArgumentTypeError(f"epsilon must lie in (0, 1], got {text}")
    return value


def _tol_override(text: str) -> tuple[str, float]:
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    try:
        return key.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad tolerance value in {text!r}") from None


def _jobs(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError("--jobs must be at least 1")
    return n


def _read_polytope(path: str, raw: bool) -> Polytope:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        poly = parse_polytope(text, raw_mode=raw, name=p.stem)
    except PolytopeError as exc:
        hint = "" if raw else " (use --raw for non-reflexive test inputs)"
        raise CliError(f"{path}: {exc}{hint}") from None
    if not raw and not (poly.reflexive and poly.delzant_smooth):
        what = [w for w, ok in (("reflexive", poly.reflexive), ("smooth", poly.delzant_smooth)) if not ok]
        raise CliError(f"{path}: not {' or '.join(what)}; pass --raw to analyze it anyway")
    return poly


def _write_json(data: dict, out: str | None) -> None:
    text = json.dumps(data, indent=2) + "\n"
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


def _tolerances(args):
    from .functional.config import DEFAULT_TOL

    overrides = dict(getattr(args, "tol", None) or [])
    try:
        return DEFAULT_TOL.with_overrides(**overrides)
    except ValueError as exc:
        raise CliError(str(exc)) from None


# ---------------------------------------------------------------------------
# Subcommands


def cmd_analyze(args) -> int:
    p = _read_polytope(args.path, args.raw)
    report = analyze(p)
    data = report.to_json()
    data["reflexive"] = p.reflexive
    data["delzant_smooth"] = p.delzant_smooth
    _write_json(data, args.out)
    _say(f"{p.name}: alpha = {report.alpha} ({report.stability.value}), volume {report.volume}, l = {report.l.a0} + {list(map(str, report.l.a))}.x")
    if report.stability is StabilityClass.UNSTABLE:
        if args.raw:
            _say("alpha > 1 (advisory in --raw mode)")
            return EXIT_OK
        return EXIT_UNSTABLE
    return EXIT_OK


def cmd_survey(args) -> int:
    if args.path and args.bundled:
        raise CliError("give a database path or --bundled, not both")
    if args.bundled or not args.path:
        db, diagnostics = load_bundled(), []
        source = BUNDLED_FILE
    else:
        try:
            db, diagnostics = load_database(args.path)
        except DatabaseError as exc:
            raise CliError(str(exc)) from None
        source = args.path
    for d in diagnostics:
        _say(f"diagnostic: {d}")
    rows, summary = run_survey(db, args.jobs)
    if args.out:
        emit_report(rows, args.out, args.format, timings=args.timings)
    else:
        sys.stdout.write(rows_to_csv(rows, args.timings) if args.format == "csv" else rows_to_json(rows, summary, args.timings))
    if args.figures:
        from .plotting import plot_survey

        plot_survey(rows, Path(args.figures) / "survey_alpha.png")
    counts = ", ".join(f"{k}: {v}" for k, v in summary.counts.items())
    _say(f"{source}: {summary.total} polytopes ({counts})")
    if summary.boundary_ids:
        _say(f"alpha = 1 exactly for: {', '.join(summary.boundary_ids)}")
    if diagnostics:
        return EXIT_ERROR
    return EXIT_UNSTABLE if summary.has_unstable else EXIT_OK


def _experiment(args):
    """Merge a config file (if any) with command-line flags; flags win."""
    from .functional.config import ExperimentConfig, load_experiment_config

    if args.config:
        try:
            cfg = load_experiment_config(args.config)
        except (OSError, ValueError) as exc:
            raise CliError(f"{args.config}: {exc}") from None
        if not Path(cfg.polytope).is_absolute():
            cfg.polytope = str(Path(args.config).parent / cfg.polytope)
    else:
        if not args.path:
            raise CliError("a polytope path or --config is required")
        cfg = ExperimentConfig(polytope=args.path)
    if args.path:
        cfg.polytope = args.path
    for key in ("h", "R", "h_xi", "seed", "guillemin"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    if getattr(args, "raw", False):
        cfg.raw = True
    try:
        cfg.validate()
    except ValueError as exc:
        raise CliError(str(exc)) from None
    return cfg


def _grid(p: Polytope, h: float):
    from .functional import PolytopeGrid, grid_resolution

    try:
        return PolytopeGrid(p, grid_resolution(h))
    except ValueError as exc:
        raise CliError(str(exc)) from None


def _load_potential(spec: str, p: Polytope, grid, coefficient: float | None):
    from .functional import from_pl, guillemin_potential, normalize, project_convex, zero_potential
    from .functional.potentials import DiscretePotential

    if spec == "zero":
        return zero_potential(grid)
    if spec == "guillemin":
        u = guillemin_potential(p, grid) if coefficient is None else guillemin_potential(p, grid, coefficient)
        return normalize(u)
    try:
        data = json.loads(Path(spec).read_text())
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read potential file {spec}: {exc}") from None
    if "pieces" in data:
        pl = PiecewiseLinearConvex.from_pieces([(Fraction(c0), [Fraction(x) for x in c]) for c0, c in data["pieces"]])
        return normalize(from_pl(grid, pl, label=Path(spec).stem))
    if "values" in data:
        values = np.asarray(data["values"], dtype=float)
        if values.shape != (len(grid),):
            raise CliError(f"potential file has {values.size} values, the grid has {len(grid)} nodes")
        return normalize(project_convex(DiscretePotential(grid, values, label=Path(spec).stem)))
    raise CliError("potential file needs 'pieces' or 'values'")


def cmd_eval(args) -> int:
    from .functional import ding_terms

    cfg = _experiment(args)
    p = _read_polytope(cfg.polytope, cfg.raw)
    report = analyze(p)
    grid = _grid(p, cfg.h)
    u = _load_potential(args.potential, p, grid, cfg.guillemin)
    terms = ding_terms(p, report.l, u, backend=args.backend, R=cfg.R, h_xi=cfg.h_xi, tol=_tolerances(args))
    data = {"polytope_id": p.name, "potential": args.potential, "h": cfg.h, "alpha": str(report.alpha), "class": report.stability.value}
    data.update(terms.to_json())
    _write_json(data, args.out)
    _say(f"{p.name} [{args.potential}]: D = {terms.ding:.10g}, I = {terms.linear:.10g}, J = {terms.j:.10g}, nonlinear = {terms.nonlinear:.10g}")
    return EXIT_OK


def cmd_probe(args) -> int:
    from .functional import pseudo_bound_probe, random_family, scaling_family, spike_sequence

    cfg = _experiment(args)
    if args.family:
        cfg.family = args.family
    for key in ("vertex", "width", "count"):
        if getattr(args, key) is not None:
            setattr(cfg, key, getattr(args, key))
    if args.growth:
        cfg.growth = args.growth
    if args.eps:
        cfg.eps = args.eps
    p = _read_polytope(cfg.polytope, cfg.raw)
    report = analyze(p)
    grid = _grid(p, cfg.h)
    try:
        if cfg.family == "scaling":
            family = scaling_family(p, grid, cfg.growth, coefficient=cfg.guillemin)
        elif cfg.family == "spike":
            if not 0 <= cfg.vertex < len(p.vertices):
                raise CliError(f"vertex index {cfg.vertex} out of range (polytope has {len(p.vertices)} vertices)")
            family = spike_sequence(p, grid, cfg.vertex, cfg.growth, Fraction(cfg.width).limit_denominator(10**6), cfg.guillemin)
        else:
            family = random_family(p, grid, cfg.seed, cfg.count, cfg.guillemin)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            result = pseudo_bound_probe(p, report.l, family, cfg.eps, _tolerances(args), jobs=args.jobs or default_jobs(), R=cfg.R, h_xi=cfg.h_xi)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    data = {"polytope_id": p.name, "alpha": str(report.alpha), "class": report.stability.value}
    data.update(result.to_json())
    data["note"] = "family-level evidence only; the exact alpha class is the authoritative verdict"
    _write_json(data, args.out)
    if args.figures:
        from .plotting import plot_probe

        plot_probe(result, Path(args.figures) / "probe.png")
    for e, c, v in zip(result.epsilons, result.C, result.verdicts):
        _say(f"eps = {e:g}: C_eps = {c:.6g} ({v})")
    return EXIT_OK


def cmd_minimize(args) -> int:
    from .functional import minimize_ding, reference_normalized
    from .plotting import gnuplot_trace

    cfg = _experiment(args)
    if args.steps is not None:
        cfg.steps = args.steps
    if args.step_size is not None:
        cfg.step_size = args.step_size
    p = _read_polytope(cfg.polytope, cfg.raw)
    report = analyze(p)
    grid = _grid(p, cfg.h)
    init = reference_normalized(p, grid, cfg.guillemin)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        result = minimize_ding(p, report.l, init, cfg.steps, cfg.step_size, _tolerances(args), R=cfg.R, h_xi=cfg.h_xi)
    out = Path(args.out or "minimize_out")
    out.mkdir(parents=True, exist_ok=True)
    cols = [f"x{i + 1}" for i in range(p.dim)]
    lines = [",".join(cols + ["u"])]
    for x, v in zip(grid.x, result.potential.values):
        lines.append(",".join([repr(float(t)) for t in x] + [repr(float(v))]))
    (out / "minimizer.csv").write_text("\n".join(lines) + "\n")
    (out / "trace.dat").write_text(gnuplot_trace(result.trace))
    summary = {"polytope_id": p.name, "alpha": str(report.alpha), "class": report.stability.value, "h": cfg.h}
    summary.update(result.to_json())
    (out / "result.json").write_text(json.dumps(summary, indent=2) + "\n")
    if args.figures:
        from .plotting import plot_potential, plot_trace

        plot_trace(result.trace, Path(args.figures) / "trace.png")
        if p.dim <= 2:
            plot_potential(result.potential, Path(args.figures) / "minimizer.png")
    _say(f"{p.name}: D {result.trace[0]:.10g} -> {result.trace[-1]:.10g} in {len(result.steps)} steps; converged = {result.converged}")
    for flag in result.flags:
        _say(f"flag: {flag}")
    sys.stdout.write(json.dumps(summary) + "\n")
    return EXIT_OK


def cmd_gen_bundled(args) -> int:
    text = regenerate_bundled_text()
    if args.check:
        same = text == bundled_text()
        _say("bundled data matches the enumeration" if same else "bundled data differs from the enumeration")
        return EXIT_OK if same else EXIT_ERROR
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def _add_common_numeric(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("path", nargs="?", help="polytope file (text or JSON)")
    sp.add_argument("--config", help="experiment config file (key = value lines); flags override it")
    sp.add_argument("--raw", action="store_true", help="accept non-reflexive/non-smooth polytopes (test inputs)")
    sp.add_argument("--h", type=_positive_float, help="grid spacing on the polytope, must be 1/N (default 0.05)")
    sp.add_argument("--R", type=_positive_float, help="half-width of the xi box (default: from the potential)")
    sp.add_argument("--h-xi", dest="h_xi", type=_positive_float, help="xi grid spacing (default by dimension)")
    sp.add_argument("--tol", type=_tol_override, action="append", metavar="KEY=VALUE", help="override a numerical tolerance")
    sp.add_argument("--out", help="output file (eval/probe JSON) or directory (minimize)")
    sp.add_argument("--guillemin", type=_positive_float, help="coefficient of the facet potential used as reference (default 0.5)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="toricding", description="Stability invariants of toric Fano polytopes and the modified Ding functional.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    sp = sub.add_parser("analyze", help="exact alpha invariant and stability class of one polytope")
    sp.add_argument("path", help="polytope file")
    sp.add_argument("--raw", action="store_true", help="skip reflexive/smooth validation; exit code 2 becomes advisory")
    sp.add_argument("--out", help="write the JSON report here instead of stdout")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("survey", help="batch analysis of a polytope database")
    sp.add_argument("path", nargs="?", help="directory of polytope files or one multi-record file")
    sp.add_argument("--bundled", action="store_true", help="survey the bundled smooth reflexive polygons")
    sp.add_argument("--out", help="report file (default: stdout)")
    sp.add_argument("--format", choices=("csv", "json"), default="csv", help="report format (default csv)")
    sp.add_argument("--jobs", type=_jobs, default=None, help="worker processes (default $TORICDING_JOBS or 1)")
    sp.add_argument("--timings", action="store_true", help="add a wall_time_ms column (not byte-reproducible)")
    sp.add_argument("--figures", help="directory for an alpha bar chart")
    sp.set_defaults(func=cmd_survey)

    sp = sub.add_parser("eval", help="D, I, J and the nonlinear term for one potential")
    _add_common_numeric(sp)
    sp.add_argument("--potential", default="guillemin", help="zero | guillemin | JSON file with 'pieces' or 'values'")
    sp.add_argument("--backend", choices=("auto", "grid", "cov"), default="auto", help="quadrature for the nonlinear term")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("probe", help="pseudo-boundedness probe along a family of potentials")
    _add_common_numeric(sp)
    sp.add_argument("--family", choices=("scaling", "spike", "random"), help="family kind (default scaling)")
    sp.add_argument("--vertex", type=int, help="vertex index for spikes")
    sp.add_argument("--width", type=_positive_float, help="spike width (relative cap depth, default 0.25)")
    sp.add_argument("--growth", type=_positive_float, nargs="+", help="growth parameters (scale t or spike height K)")
    sp.add_argument("--eps", type=_epsilon, nargs="+", help="epsilon values in (0, 1]")
    sp.add_argument("--seed", type=int, help="seed for the random family")
    sp.add_argument("--count", type=int, help="members of the random family")
    sp.add_argument("--jobs", type=_jobs, default=None, help="worker processes for family members")
    sp.add_argument("--figures", help="directory for the C_eps curves")
    sp.set_defaults(func=cmd_probe)

    sp = sub.add_parser("minimize", help="projected descent on D from the facet potential")
    _add_common_numeric(sp)
    sp.add_argument("--steps", type=int, help="maximum descent steps (default 50)")
    sp.add_argument("--step-size", dest="step_size", type=_positive_float, help="initial step (default 1)")
    sp.add_argument("--figures", help="directory for trace and minimizer plots")
    sp.set_defaults(func=cmd_minimize)

    sp = sub.add_parser("gen-bundled", help="regenerate the bundled polygon list by enumeration")
    sp.add_argument("--out", help="write here instead of stdout")
    sp.add_argument("--check", action="store_true", help="compare with the shipped data; exit 1 on mismatch")
    sp.set_defaults(func=cmd_gen_bundled)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors, --help, --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        _say(f"error: {exc}")
        return EXIT_ERROR
    except (ValueError, OSError, RuntimeError) as exc:
        _say(f"error: {exc}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
