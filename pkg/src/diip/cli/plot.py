"""Minimal chart rasterizer: axes plus polylines, straight to PNG.

CSV tables are the canonical artifact; these renders are courtesy views, so a
tiny hand-rolled rasterizer beats a plotting dependency.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from ..tensorimage import Image, write_png

MARGIN = 24
PALETTE = [
    (31, 119, 180),
    (255, 127, 14),
    (44, 160, 44),
    (214, 39, 40),
    (148, 103, 189),
    (140, 86, 75),
    (227, 119, 194),
]


def _draw_line(canvas: np.ndarray, x0: float, y0: float, x1: float, y1: float,
               color: tuple[int, int, int]) -> None:
    h, w, _ = canvas.shape
    steps = max(2, int(2 * math.hypot(x1 - x0, y1 - y0)))
    ts = np.linspace(0.0, 1.0, steps)
    xs = np.clip(np.round(x0 + ts * (x1 - x0)).astype(int), 0, w - 1)
    ys = np.clip(np.round(y0 + ts * (y1 - y0)).astype(int), 0, h - 1)
    canvas[ys, xs] = color


def render_chart(series: list[tuple[list[float], list[float]]], path: str | Path,
                 size: tuple[int, int] = (480, 320), log_y: bool = False) -> None:
    """Draw each (xs, ys) series as a polyline over plain axes and save a PNG.

    With log_y, values are plotted as log10(|y|) and nonpositive magnitudes are
    dropped from the curve.
    """
    width, height = size
    canvas = np.full((height, width, 3), 255, dtype=np.uint8)

    cleaned = []
    for xs, ys in series:
        pts = []
        for x, y in zip(xs, ys):
            if y is None:
                continue
            v = abs(y) if log_y else y
            if log_y:
                if v <= 0:
                    continue
                v = math.log10(v)
            if math.isfinite(v):
                pts.append((float(x), float(v)))
        if pts:
            cleaned.append(pts)
    if not cleaned:
        raise ValueError("nothing to plot: all series empty")

    all_x = [p[0] for pts in cleaned for p in pts]
    all_y = [p[1] for pts in cleaned for p in pts]
    x_lo, x_hi = min(all_x), max(all_x)
    y_lo, y_hi = min(all_y), max(all_y)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    def to_px(x: float, y: float) -> tuple[float, float]:
        px = MARGIN + (x - x_lo) / (x_hi - x_lo) * (width - 2 * MARGIN)
        py = height - MARGIN - (y - y_lo) / (y_hi - y_lo) * (height - 2 * MARGIN)
        return px, py

    axis = (40, 40, 40)
    _draw_line(canvas, MARGIN, height - MARGIN, width - MARGIN, height - MARGIN, axis)
    _draw_line(canvas, MARGIN, MARGIN, MARGIN, height - MARGIN, axis)
    for frac in (0.25, 0.5, 0.75, 1.0):
        tx, _ = to_px(x_lo + frac * (x_hi - x_lo), y_lo)
        _draw_line(canvas, tx, height - MARGIN, tx, height - MARGIN + 4, axis)
        _, ty = to_px(x_lo, y_lo + frac * (y_hi - y_lo))
        _draw_line(canvas, MARGIN - 4, ty, MARGIN, ty, axis)

    for idx, pts in enumerate(cleaned):
        color = PALETTE[idx % len(PALETTE)]
        for (xa, ya), (xb, yb) in zip(pts[:-1], pts[1:]):
            pa = to_px(xa, ya)
            pb = to_px(xb, yb)
            _draw_line(canvas, pa[0], pa[1], pb[0], pb[1], color)

    write_png(Image(canvas.astype(np.float64) / 255.0), path)
