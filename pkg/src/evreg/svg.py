"""Minimal SVG line-plot emission: axes, one polyline per series, legend."""

from __future__ import annotations

import math

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]

_W, _H = 720, 480
_ML, _MR, _MT, _MB = 70, 160, 30, 50


def _ticks(lo: float, hi: float, n: int = 6) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(n - 1, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min(s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw)
    start = math.ceil(lo / step) * step
    out = []
    t = start
    while t <= hi + 1e-12:
        out.append(round(t, 10))
        t += step
    return out or [lo, hi]


def write_line_svg(path, x, series: dict, title: str = "",
                   xlabel: str = "", ylabel: str = "") -> None:
    """Write a line plot of each named series against ``x``."""
    xs = list(map(float, x))
    finite_ys = [v for ys in series.values() for v in ys if math.isfinite(v)]
    ylo = min(finite_ys + [0.0]) if finite_ys else 0.0
    yhi = max(finite_ys + [0.0]) if finite_ys else 1.0
    if yhi == ylo:
        yhi = ylo + 1.0
    pad = 0.05 * (yhi - ylo)
    ylo, yhi = ylo - pad, yhi + pad
    xlo, xhi = min(xs), max(xs)
    if xhi == xlo:
        xhi = xlo + 1.0
    pw, ph = _W - _ML - _MR, _H - _MT - _MB

    def px(v):
        return _ML + (v - xlo) / (xhi - xlo) * pw

    def py(v):
        return _MT + (yhi - v) / (yhi - ylo) * ph

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
             f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
             f'<rect width="{_W}" height="{_H}" fill="white"/>']
    if title:
        parts.append(f'<text x="{_ML + pw / 2}" y="18" text-anchor="middle" '
                     f'font-size="14">{title}</text>')
    # axes
    parts.append(f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_MT + ph}" stroke="black"/>')
    parts.append(f'<line x1="{_ML}" y1="{_MT + ph}" x2="{_ML + pw}" y2="{_MT + ph}" '
                 'stroke="black"/>')
    for t in _ticks(xlo, xhi):
        if xlo <= t <= xhi:
            parts.append(f'<line x1="{px(t):.1f}" y1="{_MT + ph}" x2="{px(t):.1f}" '
                         f'y2="{_MT + ph + 4}" stroke="black"/>')
            parts.append(f'<text x="{px(t):.1f}" y="{_MT + ph + 18}" '
                         f'text-anchor="middle">{t:g}</text>')
    for t in _ticks(ylo, yhi):
        if ylo <= t <= yhi:
            parts.append(f'<line x1="{_ML - 4}" y1="{py(t):.1f}" x2="{_ML}" '
                         f'y2="{py(t):.1f}" stroke="black"/>')
            parts.append(f'<text x="{_ML - 8}" y="{py(t):.1f}" text-anchor="end" '
                         f'dominant-baseline="middle">{t:g}</text>')
    if xlabel:
        parts.append(f'<text x="{_ML + pw / 2}" y="{_H - 10}" '
                     f'text-anchor="middle">{xlabel}</text>')
    if ylabel:
        parts.append(f'<text x="16" y="{_MT + ph / 2}" text-anchor="middle" '
                     f'transform="rotate(-90 16 {_MT + ph / 2})">{ylabel}</text>')
    # zero line for discrepancy-style plots
    if ylo < 0.0 < yhi:
        parts.append(f'<line x1="{_ML}" y1="{py(0):.1f}" x2="{_ML + pw}" y2="{py(0):.1f}" '
                     'stroke="#999" stroke-dasharray="4,3"/>')
    for idx, (name, ys) in enumerate(series.items()):
        color = _COLORS[idx % len(_COLORS)]
        pts = " ".join(f"{px(a):.1f},{py(float(b)):.1f}"
                       for a, b in zip(xs, ys) if math.isfinite(float(b)))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     'stroke-width="1.5"/>')
        ly = _MT + 16 + 18 * idx
        lx = _ML + pw + 12
        parts.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}" '
                     f'stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{lx + 28}" y="{ly}">{name}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
