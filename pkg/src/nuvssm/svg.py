"""Minimal static SVG line charts: observations, smoothed output, events.

No plotting dependency; output is a self-contained SVG file with fixed
formatting so identical inputs give byte-identical files.
"""

from __future__ import annotations

import numpy as np

_WIDTH = 720
_HEIGHT = 360
_MARGIN = 40

_EVENT_COLORS = {"jump": "#d62728", "slope-change": "#9467bd", "outlier": "#ff7f0e"}


def _fmt(x: float) -> str:
    return f"{x:.3f}"


def _scale(values, lo, hi, out_lo, out_hi):
    span = hi - lo
    if span == 0.0:
        span = 1.0
    return out_lo + (np.asarray(values, dtype=float) - lo) * (out_hi - out_lo) / span


def render_chart(y, smoothed=None, events=(), title: str = "") -> str:
    """Return an SVG document plotting y, an optional smoothed overlay, and
    event markers (iterable of objects with .index and .kind)."""
    y = np.asarray(y, dtype=float)
    K = y.shape[0]
    all_vals = [y] if smoothed is None else [y, np.asarray(smoothed, dtype=float)]
    lo = min(float(np.min(v)) for v in all_vals)
    hi = max(float(np.max(v)) for v in all_vals)
    pad = 0.05 * (hi - lo if hi > lo else 1.0)
    lo, hi = lo - pad, hi + pad
    x0, x1 = _MARGIN, _WIDTH - _MARGIN
    y0, y1 = _HEIGHT - _MARGIN, _MARGIN  # svg y axis points down

    def polyline(vals, color, width):
        xs = _scale(np.arange(K), 0, max(K - 1, 1), x0, x1)
        ys = _scale(vals, lo, hi, y0, y1)
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(xs, ys))
        return (f'<polyline fill="none" stroke="{color}" stroke-width="{width}" '
                f'points="{pts}"/>')

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" '
        f'fill="none" stroke="#cccccc"/>',
    ]
    if title:
        parts.append(f'<text x="{_WIDTH // 2}" y="24" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="14">{title}</text>')
    parts.append(polyline(y, "#1f77b4", 1))
    if smoothed is not None:
        parts.append(polyline(np.asarray(smoothed, dtype=float), "#2ca02c", 2))
    for ev in events:
        cx = float(_scale([ev.index], 0, max(K - 1, 1), x0, x1)[0])
        color = _EVENT_COLORS.get(ev.kind, "#000000")
        parts.append(f'<line x1="{_fmt(cx)}" y1="{y1}" x2="{_fmt(cx)}" y2="{y0}" '
                     f'stroke="{color}" stroke-width="1" stroke-dasharray="4 3"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_chart(path, y, smoothed=None, events=(), title: str = ""):
    with open(path, "w", newline="\n") as fh:
        fh.write(render_chart(y, smoothed, events, title))
