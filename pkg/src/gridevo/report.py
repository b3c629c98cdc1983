"""Convergence log (``curve.csv``) and its SVG rendering."""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Iterable

from .evolution import GenerationRecord

__all__ = ["CURVE_HEADER", "format_curve", "read_curve", "render_svg", "LogFormatError"]

CURVE_HEADER = ("generation", "best_gen", "mean_gen", "best_ever", "evals", "failures")


class LogFormatError(ValueError):
    pass


def format_curve(records: Iterable[GenerationRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_HEADER)
    for r in records:
        w.writerow([r.generation, repr(r.best_gen), repr(r.mean_gen), repr(r.best_ever),
                    r.evals, r.failures])
    return buf.getvalue()


def read_curve(path: str | Path) -> list[GenerationRecord]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise LogFormatError(f"cannot read log {path}: {exc}") from exc
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CURVE_HEADER:
        raise LogFormatError(f"{path}: expected header {','.join(CURVE_HEADER)}")
    records = []
    for n, row in enumerate(rows[1:], 2):
        if not row:
            continue
        try:
            g, a, b, c, e, f = row
            records.append(GenerationRecord(int(g), float(a), float(b), float(c), int(e), int(f)))
        except ValueError as exc:
            raise LogFormatError(f"{path}: bad row on line {n}: {row!r}") from exc
    if not records:
        raise LogFormatError("no data rows")
    return records


def render_svg(records: list[GenerationRecord], width: int = 640, height: int = 400) -> str:
    """Line chart of best-ever and generation-mean score against generation."""
    if not records:
        raise LogFormatError("no data rows")
    left, right, top, bottom = 56, 16, 24, 40
    pw, ph = width - left - right, height - top - bottom
    g0, g1 = records[0].generation, records[-1].generation
    values = [v for r in records for v in (r.best_ever, r.mean_gen)]
    lo, hi = min(0.0, min(values)), max(1.0, max(values))

    def x(g):
        return left + (pw * (g - g0) / (g1 - g0) if g1 > g0 else pw / 2)

    def y(v):
        return top + ph * (1.0 - (v - lo) / (hi - lo))

    def points(attr):
        return " ".join(f"{x(r.generation):.2f},{y(getattr(r, attr)):.2f}" for r in records)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for k in range(5):
        v = lo + (hi - lo) * k / 4
        out.append(f'<text x="{left - 6}" y="{y(v) + 4:.2f}" text-anchor="end">{v:.2f}</text>')
    out.append(f'<text x="{left}" y="{height - 12}" text-anchor="middle">{g0}</text>')
    out.append(f'<text x="{left + pw}" y="{height - 12}" text-anchor="middle">{g1}</text>')
    out.append(f'<text x="{left + pw / 2:.2f}" y="{height - 8}" text-anchor="middle">generation</text>')
    out.append(f'<polyline fill="none" stroke="#d62728" stroke-width="2" points="{points("best_ever")}"/>')
    out.append(f'<polyline fill="none" stroke="#1f77b4" stroke-width="2" '
               f'stroke-dasharray="5,3" points="{points("mean_gen")}"/>')
    out.append(f'<text x="{left + 8}" y="{top + 4}" fill="#d62728">best ever</text>')
    out.append(f'<text x="{left + 88}" y="{top + 4}" fill="#1f77b4">generation mean</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
