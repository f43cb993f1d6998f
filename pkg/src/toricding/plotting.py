"""File-only figures for CLI reports (Agg backend, never opens a window)."""

from __future__ import annotations

from fractions import Fraction
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

CLASS_COLORS = {
    "UNIFORM_STABLE": "#2b7bba",
    "SEMISTABLE_BOUNDARY": "#e6a100",
    "UNSTABLE": "#c8283c",
}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_survey(rows, path: str | Path) -> Path:
    """Bar chart of alpha per polytope with the alpha = 1 threshold."""
    rows = sorted(rows, key=lambda r: r.polytope_id)
    alphas = [float(Fraction(r.alpha)) for r in rows]
    fig, ax = plt.subplots(figsize=(max(4.0, 0.7 * len(rows) + 2), 3.2))
    ax.bar(range(len(rows)), alphas, color=[CLASS_COLORS[r.stability] for r in rows])
    ax.axhline(1.0, color="k", lw=0.8, ls="--")
    ax.set_xticks(range(len(rows)), [r.polytope_id for r in rows], rotation=45, ha="right")
    ax.set_ylabel("alpha")
    ax.set_ylim(bottom=min(0.0, *alphas) - 0.05, top=max(1.1, *alphas) + 0.05)
    return _save(fig, path)


def plot_trace(trace: Sequence[float], path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(range(len(trace)), trace, marker=".", lw=1)
    ax.set_xlabel("evaluation")
    ax.set_ylabel("D")
    return _save(fig, path)


def plot_probe(result, path: str | Path) -> Path:
    """One curve per epsilon: -D(u) - eps * int u along the family."""
    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    for eps, values, verdict in zip(result.epsilons, result.values, result.verdicts):
        ax.plot(result.params, values, marker="o", ms=3, lw=1, label=f"eps={eps:g} ({verdict})")
    ax.set_xlabel("growth parameter")
    ax.set_ylabel("-D - eps int u")
    ax.legend(fontsize=7)
    return _save(fig, path)


def plot_potential(u, path: str | Path) -> Path:
    """Node values of a grid potential (line in 1-D, filled contours in 2-D)."""
    grid = u.grid
    fig, ax = plt.subplots(figsize=(4.5, 3.6))
    if grid.dim == 1:
        order = grid.x[:, 0].argsort()
        ax.plot(grid.x[order, 0], u.values[order], marker=".")
        ax.set_xlabel("x")
        ax.set_ylabel("u")
    elif grid.dim == 2:
        tri = ax.tricontourf(grid.x[:, 0], grid.x[:, 1], grid.simplices[:, :3], u.values, levels=20)
        fig.colorbar(tri, ax=ax)
        ax.set_aspect("equal")
    else:
        plt.close(fig)
        raise ValueError("potential plots are available in dimensions 1 and 2")
    return _save(fig, path)


def gnuplot_trace(trace: Sequence[float]) -> str:
    """Two-column ``index value`` text, readable by gnuplot's ``plot 'file'``."""
    lines = ["# step D"]
    lines.extend(f"{i} {v:.17g}" for i, v in enumerate(trace))
    return "\n".join(lines) + "\n"
