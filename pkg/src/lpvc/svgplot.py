"""Minimal deterministic SVG bar and line charts for experiment reports."""

from __future__ import annotations

from pathlib import Path

WIDTH = 640
HEIGHT = 360
MARGIN_L = 70
MARGIN_R = 20
MARGIN_T = 40
MARGIN_B = 60
PALETTE = ("#3465a4", "#cc3333", "#4e9a06", "#f57900", "#75507b", "#555753")


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _header(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="24" text-anchor="middle" font-family="sans-serif" '
        f'font-size="16">{title}</text>',
    ]


def _axes(ylabel: str, y_lo: float, y_hi: float) -> list[str]:
    plot_h = HEIGHT - MARGIN_T - MARGIN_B
    parts = [
        f'<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" '
        f'y2="{HEIGHT - MARGIN_B}" stroke="black"/>',
        f'<line x1="{MARGIN_L}" y1="{HEIGHT - MARGIN_B}" x2="{WIDTH - MARGIN_R}" '
        f'y2="{HEIGHT - MARGIN_B}" stroke="black"/>',
        f'<text x="16" y="{MARGIN_T + plot_h // 2}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {MARGIN_T + plot_h // 2})">{ylabel}</text>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = HEIGHT - MARGIN_B - frac * plot_h
        val = y_lo + frac * (y_hi - y_lo)
        parts.append(
            f'<text x="{MARGIN_L - 6}" y="{_fmt(y + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{_fmt(val)}</text>'
        )
        if frac > 0:
            parts.append(
                f'<line x1="{MARGIN_L}" y1="{_fmt(y)}" x2="{WIDTH - MARGIN_R}" '
                f'y2="{_fmt(y)}" stroke="#dddddd"/>'
            )
    return parts


def _span(values) -> tuple[float, float]:
    lo = min(0.0, min(values))
    hi = max(values)
    if hi <= lo:
        hi = lo + 1.0
    return lo, hi


def bar_chart(path, labels, values, title: str, ylabel: str) -> None:
    """Write a deterministic single-series bar chart."""
    values = [float(v) for v in values]
    y_lo, y_hi = _span(values) if values else (0.0, 1.0)
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B
    parts = _header(title) + _axes(ylabel, y_lo, y_hi)
    n = max(len(values), 1)
    slot = plot_w / n
    bar_w = slot * 0.6
    y_of = lambda v: HEIGHT - MARGIN_B - (v - y_lo) / (y_hi - y_lo) * plot_h
    base = y_of(max(0.0, y_lo))
    for i, (label, v) in enumerate(zip(labels, values)):
        x = MARGIN_L + slot * i + (slot - bar_w) / 2
        top = y_of(v)
        y0, y1 = min(top, base), max(top, base)
        parts.append(
            f'<rect x="{_fmt(x)}" y="{_fmt(y0)}" width="{_fmt(bar_w)}" '
            f'height="{_fmt(max(y1 - y0, 0.5))}" fill="{PALETTE[0]}"/>'
        )
        parts.append(
            f'<text x="{_fmt(x + bar_w / 2)}" y="{HEIGHT - MARGIN_B + 16}" '
            f'text-anchor="middle" font-family="sans-serif" font-size="11">{label}</text>'
        )
        parts.append(
            f'<text x="{_fmt(x + bar_w / 2)}" y="{_fmt(y0 - 4)}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="10">{_fmt(v)}</text>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")


def line_chart(path, x_values, series: dict, title: str, xlabel: str, ylabel: str) -> None:
    """Write a deterministic multi-series line chart keyed by series name."""
    all_vals = [float(v) for vals in series.values() for v in vals] or [0.0, 1.0]
    y_lo, y_hi = _span(all_vals)
    x_vals = [float(x) for x in x_values]
    x_lo, x_hi = min(x_vals), max(x_vals)
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B
    x_of = lambda v: MARGIN_L + (v - x_lo) / (x_hi - x_lo) * plot_w
    y_of = lambda v: HEIGHT - MARGIN_B - (v - y_lo) / (y_hi - y_lo) * plot_h
    parts = _header(title) + _axes(ylabel, y_lo, y_hi)
    for xv in x_vals:
        parts.append(
            f'<text x="{_fmt(x_of(xv))}" y="{HEIGHT - MARGIN_B + 16}" '
            f'text-anchor="middle" font-family="sans-serif" font-size="11">{_fmt(xv)}</text>'
        )
    parts.append(
        f'<text x="{MARGIN_L + plot_w // 2}" y="{HEIGHT - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{xlabel}</text>'
    )
    for si, (name, vals) in enumerate(series.items()):
        color = PALETTE[si % len(PALETTE)]
        points = " ".join(
            f"{_fmt(x_of(xv))},{_fmt(y_of(float(v)))}" for xv, v in zip(x_vals, vals)
        )
        parts.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="2"/>'
        )
        for xv, v in zip(x_vals, vals):
            parts.append(
                f'<circle cx="{_fmt(x_of(xv))}" cy="{_fmt(y_of(float(v)))}" r="3" '
                f'fill="{color}"/>'
            )
        parts.append(
            f'<text x="{WIDTH - MARGIN_R - 6}" y="{MARGIN_T + 16 * si + 12}" '
            f'text-anchor="end" font-family="sans-serif" font-size="12" '
            f'fill="{color}">{name}</text>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")
