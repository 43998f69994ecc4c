"""Self-contained SVG line charts; no plotting dependency.

Output is deterministic (pure function of the data), which run-level
byte-identity checks rely on.
"""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["line_chart"]

WIDTH, HEIGHT = 640, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 64, 24, 40, 48
PALETTE = ["#1b6ca8", "#d1495b", "#3c8d53", "#8a5ab5", "#c98a1e", "#3aa6a6"]


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = np.linspace(lo, hi, n)
    return [float(x) for x in raw]


def _fmt(x: float) -> str:
    return f"{x:.4g}"


def line_chart(path, title: str, xlabel: str, ylabel: str, series: list[tuple]) -> None:
    """Write a line chart. ``series`` is a list of (label, xs, ys)."""
    xs_all = np.concatenate([np.asarray(s[1], dtype=float) for s in series if len(s[1])])
    ys_all = np.concatenate([np.asarray(s[2], dtype=float) for s in series if len(s[2])])
    finite = np.isfinite(ys_all)
    x_lo, x_hi = float(xs_all.min()), float(xs_all.max())
    y_lo, y_hi = float(ys_all[finite].min()), float(ys_all[finite].max())
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def px(x: float) -> float:
        return MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y: float) -> float:
        return MARGIN_T + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" '
        'fill="none" stroke="#444" stroke-width="1"/>',
    ]
    for tx in _ticks(x_lo, x_hi):
        parts.append(
            f'<line x1="{px(tx):.1f}" y1="{MARGIN_T + plot_h}" x2="{px(tx):.1f}" '
            f'y2="{MARGIN_T + plot_h + 5}" stroke="#444"/>'
            f'<text x="{px(tx):.1f}" y="{MARGIN_T + plot_h + 18}" text-anchor="middle">{_fmt(tx)}</text>'
        )
    for ty in _ticks(y_lo, y_hi):
        parts.append(
            f'<line x1="{MARGIN_L - 5}" y1="{py(ty):.1f}" x2="{MARGIN_L}" y2="{py(ty):.1f}" stroke="#444"/>'
            f'<text x="{MARGIN_L - 8}" y="{py(ty) + 4:.1f}" text-anchor="end">{_fmt(ty)}</text>'
        )
    parts.append(
        f'<text x="{MARGIN_L + plot_w / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle">{escape(xlabel)}</text>'
    )
    parts.append(
        f'<text x="16" y="{MARGIN_T + plot_h / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {MARGIN_T + plot_h / 2:.1f})">{escape(ylabel)}</text>'
    )

    for idx, (label, xs, ys) in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        pts = [
            f"{px(float(x)):.2f},{py(float(y)):.2f}"
            for x, y in zip(xs, ys)
            if np.isfinite(float(y))
        ]
        if pts:
            parts.append(
                f'<polyline points="{" ".join(pts)}" fill="none" stroke="{color}" stroke-width="1.8"/>'
            )
        ly = MARGIN_T + 14 + 16 * idx
        parts.append(
            f'<line x1="{MARGIN_L + plot_w - 130}" y1="{ly - 4}" x2="{MARGIN_L + plot_w - 110}" '
            f'y2="{ly - 4}" stroke="{color}" stroke-width="1.8"/>'
            f'<text x="{MARGIN_L + plot_w - 104}" y="{ly}">{escape(str(label))}</text>'
        )

    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
