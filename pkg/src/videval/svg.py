"""Minimal deterministic SVG plots (800x600 viewBox, polylines only)."""

from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 800, 600
LEFT, RIGHT, TOP, BOTTOM = 80, 40, 40, 70
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def _num(v: float) -> str:
    return f"{v:.2f}"


def det_svg(
    series: Sequence[tuple[str, Sequence[tuple[float, float]]]],
    title: str = "DET curve",
    x_max: float | None = None,
    log_x: bool = False,
    x_label: str = "false alarms per minute",
) -> str:
    """Step-plot ``(rfa, pmiss)`` series; points must be ordered by rfa.

    With ``log_x`` the axis starts at the smallest positive rate and zero
    rates are drawn at the left edge.
    """
    xs = [x for _, pts in series for x, _ in pts]
    if x_max is None:
        x_max = max(xs, default=1.0) or 1.0
    positive = [x for x in xs if x > 0]
    x_min = min(positive, default=x_max / 1000.0) if log_x else 0.0
    if log_x and x_min >= x_max:
        x_min = x_max / 10.0
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(x: float) -> float:
        x = min(max(x, x_min), x_max)
        if log_x:
            return LEFT + pw * (math.log10(x) - math.log10(x_min)) / (math.log10(x_max) - math.log10(x_min))
        return LEFT + pw * (x - x_min) / (x_max - x_min)

    def sy(y: float) -> float:
        return TOP + ph * (1.0 - y)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.0f}" y="24" text-anchor="middle" font-size="18">{escape(title)}</text>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for k in range(6):
        y = k / 5
        out.append(f'<text x="{LEFT - 8}" y="{_num(sy(y) + 4)}" text-anchor="end" font-size="12">{y:.1f}</text>')
    for k in range(6):
        x = x_min * (x_max / x_min) ** (k / 5) if log_x else x_min + (x_max - x_min) * k / 5
        out.append(f'<text x="{_num(sx(x))}" y="{TOP + ph + 18}" text-anchor="middle" font-size="12">{x:.3g}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.0f}" y="{HEIGHT - 20}" text-anchor="middle" font-size="14">{escape(x_label)}</text>')
    out.append(f'<text x="20" y="{TOP + ph / 2:.0f}" text-anchor="middle" font-size="14" '
               f'transform="rotate(-90 20 {TOP + ph / 2:.0f})">probability of missed detection</text>')
    for idx, (name, pts) in enumerate(series):
        colour = PALETTE[idx % len(PALETTE)]
        coords = []
        prev_y = None
        for x, y in pts:
            if prev_y is not None:
                coords.append(f"{_num(sx(x))},{_num(sy(prev_y))}")
            coords.append(f"{_num(sx(x))},{_num(sy(y))}")
            prev_y = y
        if pts:
            coords.append(f"{_num(sx(x_max))},{_num(sy(prev_y))}")
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="2" points="{" ".join(coords)}">'
                   f"<title>{escape(name)}</title></polyline>")
        out.append(f'<text x="{WIDTH - RIGHT - 4}" y="{TOP + 16 + 16 * idx}" text-anchor="end" '
                   f'font-size="12" fill="{colour}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def significance_svg(runs: Sequence[str], better: Sequence[Sequence[bool]], title: str = "significance") -> str:
    """Grid where a green cell means the row run is significantly better."""
    n = max(len(runs), 1)
    label_w = 160
    cell = min((WIDTH - label_w - 20) / n, (HEIGHT - label_w - 20) / n)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.0f}" y="20" text-anchor="middle" font-size="16">{escape(title)}</text>',
    ]
    for i, name in enumerate(runs):
        y = label_w + i * cell
        out.append(f'<text x="{label_w - 6}" y="{_num(y + cell / 2 + 4)}" text-anchor="end" font-size="11">{escape(name)}</text>')
        x = label_w + i * cell + cell / 2
        out.append(f'<text x="{_num(x)}" y="{label_w - 6}" font-size="11" '
                   f'transform="rotate(-60 {_num(x)} {label_w - 6})">{escape(name)}</text>')
        for j in range(len(runs)):
            fill = "#2ca02c" if better[i][j] else ("#dddddd" if i == j else "#ffffff")
            out.append(f'<rect x="{_num(label_w + j * cell)}" y="{_num(y)}" width="{_num(cell)}" '
                       f'height="{_num(cell)}" fill="{fill}" stroke="#999999"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
