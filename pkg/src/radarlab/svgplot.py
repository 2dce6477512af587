"""Self-contained SVG plotting (scatter and line) for run artifacts.

Output is a pure function of the inputs — no timestamps, random ids, or
library version strings — so rerunning a seeded experiment reproduces the
plot file byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]

WIDTH, HEIGHT = 640, 480
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 78, 24, 46, 56


@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    markers: bool = True
    line: bool = False
    color: str = ""

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.shape != self.y.shape:
            raise ValueError("series x and y must have the same shape")


def _limits(values: np.ndarray) -> tuple:
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi == lo:
        pad = max(abs(lo), 1.0) * 0.05
    else:
        pad = (hi - lo) * 0.05
    return lo - pad, hi + pad


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def plot_svg(path, series, xlabel: str = "", ylabel: str = "", title: str = "") -> Path:
    """Render one or more series to an SVG file and return its path."""
    series = list(series)
    if not series or all(s.x.size == 0 for s in series):
        raise ValueError("nothing to plot")
    xs = np.concatenate([s.x.ravel() for s in series if s.x.size])
    ys = np.concatenate([s.y.ravel() for s in series if s.y.size])
    x0, x1 = _limits(xs)
    y0, y1 = _limits(ys)
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def px(x):
        return MARGIN_L + (x - x0) / (x1 - x0) * plot_w

    def py(y):
        return MARGIN_T + (y1 - y) / (y1 - y0) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" '
        'fill="none" stroke="#333333" stroke-width="1"/>',
    ]
    if title:
        out.append(
            f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" '
            f'font-family="sans-serif" font-size="15">{title}</text>'
        )

    for tx in np.linspace(x0, x1, 6):
        x = px(tx)
        out.append(
            f'<line x1="{x:.2f}" y1="{MARGIN_T + plot_h}" x2="{x:.2f}" '
            f'y2="{MARGIN_T + plot_h + 5}" stroke="#333333"/>'
        )
        out.append(
            f'<text x="{x:.2f}" y="{MARGIN_T + plot_h + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{_fmt(tx)}</text>'
        )
    for ty in np.linspace(y0, y1, 6):
        y = py(ty)
        out.append(
            f'<line x1="{MARGIN_L - 5}" y1="{y:.2f}" x2="{MARGIN_L}" y2="{y:.2f}" '
            'stroke="#333333"/>'
        )
        out.append(
            f'<text x="{MARGIN_L - 8}" y="{y + 4:.2f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{_fmt(ty)}</text>'
        )
    if xlabel:
        out.append(
            f'<text x="{MARGIN_L + plot_w / 2:.1f}" y="{HEIGHT - 14}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13">{xlabel}</text>'
        )
    if ylabel:
        cy = MARGIN_T + plot_h / 2
        out.append(
            f'<text x="20" y="{cy:.1f}" text-anchor="middle" font-family="sans-serif" '
            f'font-size="13" transform="rotate(-90 20 {cy:.1f})">{ylabel}</text>'
        )

    for i, s in enumerate(series):
        color = s.color or PALETTE[i % len(PALETTE)]
        if s.line and s.x.size > 1:
            pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(s.x, s.y))
            out.append(
                f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>'
            )
        if s.markers:
            for x, y in zip(s.x, s.y):
                out.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3.2" fill="{color}"/>')

    legend_y = MARGIN_T + 14
    for i, s in enumerate(series):
        if not s.label:
            continue
        color = s.color or PALETTE[i % len(PALETTE)]
        lx = WIDTH - MARGIN_R - 170
        out.append(
            f'<rect x="{lx}" y="{legend_y - 9}" width="10" height="10" fill="{color}"/>'
        )
        out.append(
            f'<text x="{lx + 15}" y="{legend_y}" font-family="sans-serif" '
            f'font-size="12">{s.label}</text>'
        )
        legend_y += 17

    out.append("</svg>")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(out) + "\n")
    return path
