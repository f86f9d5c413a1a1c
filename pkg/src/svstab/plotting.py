"""Minimal SVG line plots: one linear and one log10 panel of l2(t), side by side."""

from __future__ import annotations

from typing import Sequence

import numpy as np

PANEL_W, PANEL_H = 800, 500
MARGIN = dict(left=80, right=20, top=40, bottom=50)
LOG_FLOOR = 1e-16
MAX_POINTS = 2000
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _thin(t: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if t.size <= MAX_POINTS:
        return t, y
    idx = np.unique(np.linspace(0, t.size - 1, MAX_POINTS).astype(int))
    return t[idx], y[idx]


def _panel(curves, title: str, ylabel: str, x0: int) -> list[str]:
    left, right, top, bottom = MARGIN["left"], MARGIN["right"], MARGIN["top"], MARGIN["bottom"]
    w, h = PANEL_W - left - right, PANEL_H - top - bottom
    ts = np.concatenate([c[1] for c in curves]) if curves else np.array([0.0, 1.0])
    ys = np.concatenate([c[2] for c in curves]) if curves else np.array([0.0, 1.0])
    tmin, tmax = float(ts.min()), float(ts.max())
    ymin, ymax = float(ys.min()), float(ys.max())
    if tmax <= tmin:
        tmax = tmin + 1.0
    if ymax <= ymin:
        ymin, ymax = ymin - 0.5, ymax + 0.5

    def px(t):
        return left + (t - tmin) / (tmax - tmin) * w

    def py(y):
        return top + (1.0 - (y - ymin) / (ymax - ymin)) * h

    out = [f'<svg x="{x0}" y="0" width="{PANEL_W}" height="{PANEL_H}" viewBox="0 0 {PANEL_W} {PANEL_H}">',
           f'<rect x="{left}" y="{top}" width="{w}" height="{h}" fill="none" stroke="black"/>',
           f'<text x="{PANEL_W / 2}" y="{top - 12}" text-anchor="middle" font-size="16">{title}</text>',
           f'<text x="{PANEL_W / 2}" y="{PANEL_H - 10}" text-anchor="middle" font-size="14">t (s)</text>',
           f'<text x="18" y="{top + h / 2}" text-anchor="middle" font-size="14" '
           f'transform="rotate(-90 18 {top + h / 2})">{ylabel}</text>']
    for k in range(6):
        tv = tmin + k * (tmax - tmin) / 5
        yv = ymin + k * (ymax - ymin) / 5
        out.append(f'<text x="{_fmt(px(tv))}" y="{top + h + 18}" text-anchor="middle" font-size="12">{_fmt(tv)}</text>')
        out.append(f'<text x="{left - 6}" y="{_fmt(py(yv) + 4)}" text-anchor="end" font-size="12">{_fmt(yv)}</text>')
    for i, (label, t, y) in enumerate(curves):
        color = COLORS[i % len(COLORS)]
        pts = " ".join(f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in zip(t, y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{left + w - 10}" y="{top + 20 + 18 * i}" text-anchor="end" font-size="13" '
                   f'fill="{color}">{label}</text>')
    out.append("</svg>")
    return out


def l2_figure(curves: Sequence[tuple[str, np.ndarray, np.ndarray]]) -> str:
    """Two-panel SVG of l2 against time; the right panel plots log10(max(l2, 1e-16))."""
    lin, log = [], []
    for label, t, y in curves:
        t, y = _thin(np.asarray(t, float), np.asarray(y, float))
        lin.append((label, t, y))
        log.append((label, t, np.log10(np.maximum(y, LOG_FLOOR))))
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{2 * PANEL_W}" height="{PANEL_H}" '
             f'viewBox="0 0 {2 * PANEL_W} {PANEL_H}">',
             '<rect width="100%" height="100%" fill="white"/>']
    parts += _panel(lin, "L2 norm (linear scale)", "l2", 0)
    parts += _panel(log, "L2 norm (log scale)", "log10 l2", PANEL_W)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
