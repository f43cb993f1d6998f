"""Batch analysis of polytope databases."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .polytope import Polytope, PolytopeError, parse_polytope
from .stability import StabilityClass, analyze, classify

log = logging.getLogger(__name__)

JOBS_ENV = "TORICDING_JOBS"
POLYTOPE_SUFFIXES = {".poly", ".txt", ".json", ".dat"}


class DatabaseError(ValueError):
    pass


@dataclass(frozen=True)
class SurveyRow:
    polytope_id: str
    dim: int
    vertex_count: int
    volume: str
    alpha: str
    stability: str
    wall_time_ms: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if classify(Fraction(self.alpha)).value != self.stability:
            raise ValueError(f"class {self.stability} inconsistent with alpha {self.alpha}")


CSV_COLUMNS = ["polytope_id", "dim", "vertex_count", "volume", "alpha", "class"]


@dataclass
class SurveySummary:
    total: int
    counts: dict[str, int]
    boundary_ids: list[str]

    @property
    def has_unstable(self) -> bool:
        return self.counts.get(StabilityClass.UNSTABLE.value, 0) > 0


def _split_records(text: str) -> list[str]:
    records, current = [], []
    for line in text.splitlines():
        if line.strip():
            current.append(line)
        elif current:
            records.append("\n".join(current))
            current = []
    if current:
        records.append("\n".join(current))
    # comment-only blocks are not records
    return [r for r in records if any(l.split("#", 1)[0].strip() for l in r.splitlines())]


def parse_records(text: str, source: str = "<text>") -> tuple[list[Polytope], list[str]]:
    """Parse a multi-polytope file; bad records become diagnostics, not exceptions."""
    polys, diagnostics = [], []
    records = _split_records(text)
    stem = Path(source).stem
    for i, rec in enumerate(records):
        default = stem if len(records) == 1 else f"{stem}#{i + 1}"
        try:
            p = parse_polytope(rec, name=default)
        except PolytopeError as exc:
            diagnostics.append(f"{source} record {i + 1}: {exc}")
            continue
        if not (p.reflexive and p.delzant_smooth):
            diagnostics.append(f"{source} record {i + 1} ({p.name}): not a smooth reflexive polytope")
            continue
        polys.append(p)
    return polys, diagnostics


def load_database(path: str | os.PathLike) -> tuple[list[Polytope], list[str]]:
    """Load a directory of polytope files or one multi-polytope file."""
    path = Path(path)
    if path.is_dir():
        files = sorted(f for f in path.iterdir() if f.is_file() and f.suffix in POLYTOPE_SUFFIXES)
    elif path.is_file():
        files = [path]
    else:
        raise DatabaseError(f"no such database: {path}")
    polys: list[Polytope] = []
    diagnostics: list[str] = []
    for f in files:
        try:
            text = f.read_text()
        except OSError as exc:
            diagnostics.append(f"{f}: {exc}")
            continue
        found, diag = parse_records(text, source=f.name)
        polys.extend(found)
        diagnostics.extend(diag)
    if not polys:
        raise DatabaseError(f"empty database: {path}" + (f" ({len(diagnostics)} errors)" if diagnostics else ""))
    seen: Counter[str] = Counter()
    unique = []
    for p in polys:
        seen[p.name] += 1
        if seen[p.name] > 1:
            p = Polytope(p.dim, p.vertices, p.facets, p.reflexive, p.delzant_smooth, p.raw_mode, f"{p.name}~{seen[p.name]}")
        unique.append(p)
    return unique, diagnostics


def survey_row(p: Polytope) -> SurveyRow:
    start = time.perf_counter()
    report = analyze(p)
    elapsed = (time.perf_counter() - start) * 1000.0
    return SurveyRow(
        polytope_id=p.name or "",
        dim=p.dim,
        vertex_count=len(p.vertices),
        volume=str(report.volume),
        alpha=str(report.alpha),
        stability=report.stability.value,
        wall_time_ms=elapsed,
    )


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get(JOBS_ENV, "1")))
    except ValueError:
        return 1


def run_survey(db: Sequence[Polytope], jobs: int | None = None) -> tuple[list[SurveyRow], SurveySummary]:
    jobs = default_jobs() if jobs is None else jobs
    if jobs > 1 and len(db) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(survey_row, db))
    else:
        rows = [survey_row(p) for p in db]
    rows.sort(key=lambda r: r.polytope_id)
    return rows, summarize(rows)


def summarize(rows: Sequence[SurveyRow]) -> SurveySummary:
    counts = {c.value: 0 for c in StabilityClass}
    for r in rows:
        counts[r.stability] += 1
    boundary = [r.polytope_id for r in rows if r.stability == StabilityClass.SEMISTABLE_BOUNDARY.value]
    for pid in boundary:
        log.warning("alpha = 1 exactly for %s: a boundary case", pid)
    return SurveySummary(len(rows), counts, boundary)


def rows_to_csv(rows: Sequence[SurveyRow], timings: bool = False) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS + (["wall_time_ms"] if timings else []))
    for r in sorted(rows, key=lambda r: r.polytope_id):
        line = [r.polytope_id, r.dim, r.vertex_count, r.volume, r.alpha, r.stability]
        if timings:
            line.append(f"{r.wall_time_ms:.3f}")
        writer.writerow(line)
    return buf.getvalue()


def rows_to_json(rows: Sequence[SurveyRow], summary: SurveySummary | None = None, timings: bool = False) -> str:
    out = []
    for r in sorted(rows, key=lambda r: r.polytope_id):
        d = asdict(r)
        d["class"] = d.pop("stability")
        if not timings:
            d.pop("wall_time_ms")
        out.append(d)
    summary = summarize(rows) if summary is None else summary
    return json.dumps({"rows": out, "summary": asdict(summary)}, indent=2) + "\n"


def rows_from_json(text: str) -> list[SurveyRow]:
    data = json.loads(text)
    rows = []
    for d in data["rows"]:
        d = dict(d)
        d["stability"] = d.pop("class")
        rows.append(SurveyRow(**d))
    return rows


def emit_report(rows: Sequence[SurveyRow], path: str | os.PathLike, fmt: str = "csv", timings: bool = False) -> Path:
    if not rows:
        raise ValueError("no rows to report")
    path = Path(path)
    if fmt == "csv":
        text = rows_to_csv(rows, timings)
    elif fmt == "json":
        text = rows_to_json(rows, timings=timings)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    path.write_text(text)
    return path
