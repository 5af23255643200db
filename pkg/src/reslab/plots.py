"""Minimal SVG line and scatter plots.

Plots are regenerated from emitted CSV files, never used as inputs.
"""

from __future__ import annotations

import csv
import math
from html import escape
from pathlib import Path
from typing import Sequence

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    out = []
    x = start
    while x <= hi + 1e-12 * step:
        out.append(round(x, 12))
        x += step
    return out


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def svg_plot(series: Sequence[tuple], title: str = "", xlabel: str = "", ylabel: str = "",
             width: int = 720, height: int = 420, logy: bool = False, scatter: bool = False) -> str:
    """series: (xs, ys, label) triples.  Non-finite points are dropped."""
    pts = []
    for xs, ys, lab in series:
        xy = [(float(x), float(y)) for x, y in zip(xs, ys)
              if math.isfinite(float(x)) and math.isfinite(float(y)) and (not logy or float(y) > 0)]
        if logy:
            xy = [(x, math.log10(y)) for x, y in xy]
        pts.append((xy, lab))
    allx = [p[0] for xy, _ in pts for p in xy] or [0.0, 1.0]
    ally = [p[1] for xy, _ in pts for p in xy] or [0.0, 1.0]
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(ally), max(ally)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.04 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    L, R, T, B = 70, 20, 36, 50
    pw, ph = width - L - R, height - T - B

    def X(x):
        return L + (x - x0) / (x1 - x0) * pw

    def Y(y):
        return T + (1 - (y - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{L}" y="{T}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>']
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{X(t):.2f}" y1="{T + ph}" x2="{X(t):.2f}" y2="{T + ph + 5}" stroke="#444"/>')
        out.append(f'<text x="{X(t):.2f}" y="{T + ph + 18}" text-anchor="middle">{_fmt(t)}</text>')
    for t in _ticks(y0, y1):
        lab = _fmt(10 ** t) if logy else _fmt(t)
        out.append(f'<line x1="{L - 5}" y1="{Y(t):.2f}" x2="{L}" y2="{Y(t):.2f}" stroke="#444"/>')
        out.append(f'<text x="{L - 8}" y="{Y(t) + 4:.2f}" text-anchor="end">{lab}</text>')
    out.append(f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>')
    out.append(f'<text x="{L + pw / 2}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{T + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {T + ph / 2})">{escape(ylabel)}</text>')
    for k, (xy, lab) in enumerate(pts):
        col = PALETTE[k % len(PALETTE)]
        if scatter:
            out += [f'<circle cx="{X(x):.2f}" cy="{Y(y):.2f}" r="2.5" fill="{col}"/>' for x, y in xy]
        elif xy:
            path = " ".join(f"{X(x):.2f},{Y(y):.2f}" for x, y in xy)
            out.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.4" points="{path}"/>')
        out.append(f'<text x="{L + pw - 8}" y="{T + 16 + 15 * k}" text-anchor="end" fill="{col}">{escape(lab)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def read_csv_columns(path) -> dict[str, list[float]]:
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        cols: dict[str, list[float]] = {k: [] for k in rd.fieldnames or []}
        for row in rd:
            for k, v in row.items():
                try:
                    cols[k].append(float(v))
                except (TypeError, ValueError):
                    cols[k].append(float("nan"))
    return cols


def plot_csv(csv_path, svg_path, x: str, ys: Sequence[str], title: str = "", ylabel: str = "",
             logy: bool = False, scatter: bool = False) -> Path:
    """Render columns of a CSV file; every y-column matching a prefix ending in '*' is included."""
    cols = read_csv_columns(csv_path)
    names = []
    for y in ys:
        if y.endswith("*"):
            names += [c for c in cols if c.startswith(y[:-1])]
        elif y in cols:
            names.append(y)
    series = [(cols[x], cols[n], n) for n in names]
    svg = svg_plot(series, title, x, ylabel, logy=logy, scatter=scatter)
    p = Path(svg_path)
    p.write_text(svg)
    return p
