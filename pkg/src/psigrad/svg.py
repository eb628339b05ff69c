"""Minimal self-contained SVG line charts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")
MAX_POINTS = 1500

W, H = 640, 360
ML, MR, MT, MB = 70, 150, 30, 45


@dataclass
class Panel:
    title: str
    series: list = field(default_factory=list)  # (label, x, y)
    xlabel: str = "t"
    ylabel: str = ""
    log_y: bool = False

    def add(self, label: str, x, y) -> "Panel":
        self.series.append((label, np.asarray(x, dtype=float), np.asarray(y, dtype=float)))
        return self


def _thin(x, y):
    if len(x) <= MAX_POINTS:
        return x, y
    idx = np.unique(np.linspace(0, len(x) - 1, MAX_POINTS).astype(int))
    return x[idx], y[idx]


def _ticks(lo: float, hi: float, n: int = 5) -> list:
    if hi <= lo:
        return [lo]
    step = 10 ** math.floor(math.log10((hi - lo) / n))
    for m in (1, 2, 5, 10):
        if (hi - lo) / (step * m) <= n:
            step *= m
            break
    first = math.ceil(lo / step) * step
    return [first + i * step for i in range(int((hi - first) / step) + 1)]


def _panel_svg(p: Panel, y0: int) -> list:
    out = [f'<g transform="translate(0,{y0})">']
    pts = []
    for label, x, y in p.series:
        x, y = _thin(x, y)
        if p.log_y:
            with np.errstate(divide="ignore", invalid="ignore"):
                y = np.log10(np.where(y > 0, y, np.nan))
        ok = np.isfinite(x) & np.isfinite(y)
        pts.append((label, x[ok], y[ok]))
    xs = np.concatenate([q[1] for q in pts]) if pts else np.array([0.0, 1.0])
    ys = np.concatenate([q[2] for q in pts]) if pts else np.array([0.0, 1.0])
    if xs.size == 0:
        xs, ys = np.array([0.0, 1.0]), np.array([0.0, 1.0])
    xlo, xhi = float(xs.min()), float(xs.max())
    ylo, yhi = float(ys.min()), float(ys.max())
    if xhi == xlo:
        xhi = xlo + 1.0
    if yhi == ylo:
        ylo, yhi = ylo - 0.5, yhi + 0.5
    pw, ph = W - ML - MR, H - MT - MB

    def sx(v):
        return ML + (v - xlo) / (xhi - xlo) * pw

    def sy(v):
        return MT + (1 - (v - ylo) / (yhi - ylo)) * ph

    out.append(f'<text x="{W / 2:.0f}" y="18" text-anchor="middle" font-size="14">{escape(p.title)}</text>')
    out.append(f'<rect x="{ML}" y="{MT}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>')
    for tx in _ticks(xlo, xhi):
        out.append(f'<text x="{sx(tx):.1f}" y="{MT + ph + 16}" text-anchor="middle" font-size="10">{tx:.4g}</text>')
    for ty in _ticks(ylo, yhi):
        lab = f"1e{ty:.3g}" if p.log_y else f"{ty:.4g}"
        out.append(f'<text x="{ML - 6}" y="{sy(ty) + 3:.1f}" text-anchor="end" font-size="10">{lab}</text>')
        out.append(f'<line x1="{ML}" x2="{ML + pw}" y1="{sy(ty):.1f}" y2="{sy(ty):.1f}" stroke="#ddd"/>')
    out.append(f'<text x="{ML + pw / 2:.0f}" y="{H - 8}" text-anchor="middle" font-size="11">{escape(p.xlabel)}</text>')
    ylab = escape(p.ylabel + (" (log10)" if p.log_y else ""))
    out.append(f'<text x="14" y="{MT + ph / 2:.0f}" font-size="11" transform="rotate(-90 14 {MT + ph / 2:.0f})" text-anchor="middle">{ylab}</text>')
    for i, (label, x, y) in enumerate(pts):
        color = PALETTE[i % len(PALETTE)]
        if x.size:
            path = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{path}"/>')
        ly = MT + 14 * i + 8
        out.append(f'<line x1="{W - MR + 10}" x2="{W - MR + 28}" y1="{ly}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{W - MR + 32}" y="{ly + 4}" font-size="10">{escape(label)}</text>')
    out.append("</g>")
    return out


def write_svg(path, panels) -> Path:
    """Stack ``panels`` vertically into one SVG file."""
    path = Path(path)
    height = H * len(panels)
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{height}" viewBox="0 0 {W} {height}" font-family="sans-serif">',
        f'<rect width="{W}" height="{height}" fill="white"/>',
    ]
    for i, p in enumerate(panels):
        lines.extend(_panel_svg(p, i * H))
    lines.append("</svg>")
    path.write_text("\n".join(lines) + "\n")
    return path
