"""Minimal SVG line plots: dependency-free text output, diffable in tests."""

from __future__ import annotations

import math

_WIDTH, _HEIGHT = 640, 420
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 70, 20, 40, 50
_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#17becf", "#7f7f7f"]


def _transform(vals, lo, hi, out_lo, out_hi, log):
    if log:
        vals = [math.log10(v) for v in vals]
        lo, hi = math.log10(lo), math.log10(hi)
    span = hi - lo or 1.0
    return [out_lo + (v - lo) / span * (out_hi - out_lo) for v in vals]


def _ticks(lo, hi, log, count=5):
    if log:
        k0, k1 = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
        return [10.0 ** k for k in range(k0, k1 + 1)]
    step = (hi - lo) / count or 1.0
    return [lo + i * step for i in range(count + 1)]


def write_line_svg(path, series, title="", xlabel="", ylabel="",
                   logx=False, logy=False) -> None:
    """Write a line chart; ``series`` is a list of (label, xs, ys) tuples.

    Non-positive values are dropped on log axes.
    """
    cleaned = []
    for label, xs, ys in series:
        pts = [(float(x), float(y)) for x, y in zip(xs, ys)
               if (not logx or x > 0) and (not logy or y > 0)]
        if pts:
            cleaned.append((label, pts))
    if not cleaned:
        raise ValueError("nothing to plot")
    all_x = [p[0] for _, pts in cleaned for p in pts]
    all_y = [p[1] for _, pts in cleaned for p in pts]
    x_lo, x_hi = min(all_x), max(all_x)
    y_lo, y_hi = min(all_y), max(all_y)
    if x_lo == x_hi:
        x_lo, x_hi = x_lo - 1, x_hi + 1
    if y_lo == y_hi:
        y_lo, y_hi = y_lo * 0.5 if logy else y_lo - 1, y_hi * 2 if logy else y_hi + 1

    plot_l, plot_r = _MARGIN_L, _WIDTH - _MARGIN_R
    plot_t, plot_b = _MARGIN_T, _HEIGHT - _MARGIN_B
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<text x="{_WIDTH / 2:.0f}" y="22" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
        f'<rect x="{plot_l}" y="{plot_t}" width="{plot_r - plot_l}" '
        f'height="{plot_b - plot_t}" fill="none" stroke="#333"/>',
    ]
    for tx in _ticks(x_lo, x_hi, logx):
        if tx < x_lo or tx > x_hi:
            continue
        (px,) = _transform([tx], x_lo, x_hi, plot_l, plot_r, logx)
        parts.append(f'<line x1="{px:.1f}" y1="{plot_b}" x2="{px:.1f}" '
                     f'y2="{plot_b + 5}" stroke="#333"/>')
        parts.append(f'<text x="{px:.1f}" y="{plot_b + 18}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="10">{tx:.4g}</text>')
    for ty in _ticks(y_lo, y_hi, logy):
        if ty < y_lo or ty > y_hi:
            continue
        (py,) = _transform([ty], y_lo, y_hi, plot_b, plot_t, logy)
        parts.append(f'<line x1="{plot_l - 5}" y1="{py:.1f}" x2="{plot_l}" '
                     f'y2="{py:.1f}" stroke="#333"/>')
        parts.append(f'<text x="{plot_l - 8}" y="{py + 3:.1f}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="10">{ty:.4g}</text>')
    parts.append(f'<text x="{(plot_l + plot_r) / 2:.0f}" y="{_HEIGHT - 12}" '
                 f'text-anchor="middle" font-family="sans-serif" font-size="12">{xlabel}</text>')
    parts.append(f'<text x="16" y="{(plot_t + plot_b) / 2:.0f}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="12" '
                 f'transform="rotate(-90 16 {(plot_t + plot_b) / 2:.0f})">{ylabel}</text>')
    for idx, (label, pts) in enumerate(cleaned):
        color = _COLORS[idx % len(_COLORS)]
        px = _transform([p[0] for p in pts], x_lo, x_hi, plot_l, plot_r, logx)
        py = _transform([p[1] for p in pts], y_lo, y_hi, plot_b, plot_t, logy)
        coords = " ".join(f"{x:.1f},{y:.1f}" for x, y in zip(px, py))
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        ly = plot_t + 14 + 14 * idx
        parts.append(f'<line x1="{plot_r - 110}" y1="{ly - 4}" x2="{plot_r - 90}" '
                     f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{plot_r - 85}" y="{ly}" font-family="sans-serif" '
                     f'font-size="10">{label}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
