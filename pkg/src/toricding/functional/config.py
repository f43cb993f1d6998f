"""Numerical tolerances and the ``key = value`` experiment config format."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path


@dataclass(frozen=True)
class Tolerances:
    envelope: float = 1e-12  # discrete convexity after projection
    inf_phi: float = 1e-9  # inf of the dual against -u(0)
    scaling: float = 1e-6  # epsilon-scaling identity
    backend_rel: float = 1e-4  # dual-grid vs change-of-variables
    descent: float = 1e-6  # per accepted minimizer step
    minimality: float = 1e-6  # D_A(v0 + t w) >= D_A(v0) - tol
    midpoint_convexity: float = 1e-8
    ricci_mass: float = 1e-3
    tail_decay: float = 30.0  # dual box sized so the tail is below exp(-tail_decay)
    trend_slope: float = 1e-3  # running-max slope that counts as divergence
    converge_rel: float = 1e-9

    def with_overrides(self, **kw) -> "Tolerances":
        known = {f.name for f in fields(self)}
        bad = set(kw) - known
        if bad:
            raise ValueError(f"unknown tolerance(s): {sorted(bad)}")
        return replace(self, **{k: float(v) for k, v in kw.items()})


DEFAULT_TOL = Tolerances()

# Default dual-grid spacing and per-axis node cap by dimension.  Smooth
# duals use the trapezoid rule, which converges spectrally, so coarser.
XI_SPACING = {1: 0.01, 2: 0.1, 3: 0.25}
XI_SPACING_SMOOTH = {1: 0.05, 2: 0.25, 3: 0.5}
XI_NODE_CAP = {1: 200_001, 2: 1_601, 3: 121}


def grid_resolution(h: float) -> int:
    """Nodes per unit length for spacing ``h``; the spacing must be ``1/N``."""
    if not h > 0:
        raise ValueError(f"grid spacing must be positive, got {h}")
    n = round(1.0 / h)
    if n < 1 or abs(n * h - 1.0) > 1e-9:
        raise ValueError(f"grid spacing must be the reciprocal of an integer, got {h}")
    return n


@dataclass
class ExperimentConfig:
    polytope: str
    raw: bool = False
    h: float = 0.05
    R: float | None = None
    h_xi: float | None = None
    eps: list[float] = field(default_factory=lambda: [1.0, 0.5, 0.25, 0.125, 0.0625])
    family: str = "scaling"
    vertex: int = 0
    width: float = 0.25
    growth: list[float] = field(default_factory=lambda: [1, 2, 4, 8, 16, 24, 32, 48, 64])
    seed: int = 0
    count: int = 8
    steps: int = 50
    step_size: float = 1.0
    guillemin: float | None = None  # facet-potential coefficient; None keeps the library default

    def validate(self) -> None:
        grid_resolution(self.h)
        if any(not (0 < e <= 1) for e in self.eps):
            raise ValueError("epsilon values must lie in (0, 1]")
        if self.family not in {"scaling", "spike", "random"}:
            raise ValueError(f"unknown family {self.family!r}")


def _parse_list(text: str) -> list[float]:
    return [float(x) for x in text.replace(",", " ").split()]


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    """Read a ``key = value`` file (no section headers; ``#`` comments)."""
    text = Path(path).read_text()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.read_string("[experiment]\n" + text)
    sec = parser["experiment"]
    if "polytope" not in sec:
        raise ValueError("config needs a 'polytope' entry")
    cfg = ExperimentConfig(polytope=sec["polytope"])
    for key, value in sec.items():
        if key == "polytope":
            continue
        if key == "family":
            parts = value.split()
            cfg.family = parts[0]
            if cfg.family == "spike" and len(parts) > 1:
                cfg.vertex = int(parts[1])
            if cfg.family == "random" and len(parts) > 1:
                cfg.seed = int(parts[1])
                if len(parts) > 2:
                    cfg.count = int(parts[2])
        elif key in {"eps", "growth"}:
            setattr(cfg, key, _parse_list(value))
        elif key == "raw":
            cfg.raw = sec.getboolean(key)
        elif key in {"vertex", "seed", "count", "steps"}:
            setattr(cfg, key, int(value))
        elif key in {"h", "r", "h_xi", "width", "step_size", "guillemin"}:
            setattr(cfg, "R" if key == "r" else key, float(value))
        else:
            raise ValueError(f"unknown config key {key!r}")
    cfg.validate()
    return cfg
