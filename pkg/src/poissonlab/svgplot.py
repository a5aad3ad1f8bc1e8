"""Minimal static SVG plots, written directly (no renderer dependency).

Output is deterministic byte-for-byte given the same data: coordinates are
formatted with a fixed precision and no timestamps or ids are embedded.
"""

from __future__ import annotations

import math
from typing import Sequence

_W, _H = 640, 420
_ML, _MR, _MT, _MB = 62, 16, 24, 46
_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]


def _fmt(v: float) -> str:
    return format(v, ".2f")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min(s * mag for s in (1, 2, 5, 10) if s * mag >= raw)
    first = math.ceil(lo / step) * step
    out = []
    t = first
    while t <= hi + 1e-9 * step:
        out.append(round(t, 12))
        t += step
    return out


def line_plot(
    series: Sequence[dict],
    xlabel: str,
    ylabel: str,
    title: str = "",
    log_y: bool = False,
) -> str:
    """Render polyline series to an SVG string.

    Each series: {"x": seq, "y": seq, optional "label", optional "err"}.
    """
    pts = [
        (float(x), float(y))
        for s in series
        for x, y in zip(s["x"], s["y"])
        if not (log_y and y <= 0)
    ]
    if not pts:
        raise ValueError("nothing to plot")
    xs = [p[0] for p in pts]
    ys = [math.log10(p[1]) if log_y else p[1] for p in pts]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad_y = 0.06 * (y_hi - y_lo)
    y_lo -= pad_y
    y_hi += pad_y

    def sx(x: float) -> float:
        return _ML + (x - x_lo) / (x_hi - x_lo) * (_W - _ML - _MR)

    def sy(y: float) -> float:
        yy = math.log10(y) if log_y else y
        return _H - _MB - (yy - y_lo) / (y_hi - y_lo) * (_H - _MT - _MB)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
    ]
    axis = (
        f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" y2="{_H - _MB}" '
        'stroke="black"/>'
        f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" stroke="black"/>'
    )
    parts.append(axis)
    for t in _ticks(x_lo, x_hi):
        x = sx(t)
        parts.append(
            f'<line x1="{_fmt(x)}" y1="{_H - _MB}" x2="{_fmt(x)}" '
            f'y2="{_H - _MB + 5}" stroke="black"/>'
            f'<text x="{_fmt(x)}" y="{_H - _MB + 18}" font-size="11" '
            f'text-anchor="middle">{t:g}</text>'
        )
    for t in _ticks(y_lo, y_hi):
        y = _H - _MB - (t - y_lo) / (y_hi - y_lo) * (_H - _MT - _MB)
        label = f"1e{t:g}" if log_y else f"{t:g}"
        parts.append(
            f'<line x1="{_ML - 5}" y1="{_fmt(y)}" x2="{_ML}" y2="{_fmt(y)}" '
            'stroke="black"/>'
            f'<text x="{_ML - 8}" y="{_fmt(y + 4)}" font-size="11" '
            f'text-anchor="end">{label}</text>'
        )
    for si, s in enumerate(series):
        color = _COLORS[si % len(_COLORS)]
        coords = [
            (sx(float(x)), sy(float(y)))
            for x, y in zip(s["x"], s["y"])
            if not (log_y and y <= 0)
        ]
        path = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in coords)
        parts.append(
            f'<polyline points="{path}" fill="none" stroke="{color}" '
            'stroke-width="1.6"/>'
        )
        for x, y in coords:
            parts.append(
                f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="2.6" fill="{color}"/>'
            )
        if "err" in s:
            for x, y, e in zip(s["x"], s["y"], s["err"]):
                if log_y and y - e <= 0:
                    continue
                parts.append(
                    f'<line x1="{_fmt(sx(float(x)))}" y1="{_fmt(sy(float(y) - float(e)))}" '
                    f'x2="{_fmt(sx(float(x)))}" y2="{_fmt(sy(float(y) + float(e)))}" '
                    f'stroke="{color}" stroke-width="1"/>'
                )
        if "label" in s:
            parts.append(
                f'<text x="{_W - _MR - 6}" y="{_MT + 16 * (si + 1)}" font-size="12" '
                f'text-anchor="end" fill="{color}">{s["label"]}</text>'
            )
    parts.append(
        f'<text x="{(_ML + _W - _MR) // 2}" y="{_H - 10}" font-size="12" '
        f'text-anchor="middle">{xlabel}</text>'
    )
    parts.append(
        f'<text x="14" y="{(_MT + _H - _MB) // 2}" font-size="12" '
        f'text-anchor="middle" transform="rotate(-90 14 {(_MT + _H - _MB) // 2})">'
        f"{ylabel}</text>"
    )
    if title:
        parts.append(
            f'<text x="{_W // 2}" y="16" font-size="13" text-anchor="middle">'
            f"{title}</text>"
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
