"""Minimal SVG 1.1 line charts: polylines and staircases on shared axes."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


@dataclass
class Chart:
    title: str
    width: int = 640
    height: int = 400
    margin: int = 48
    series: list = field(default_factory=list)

    def line(self, xs, ys, label: str) -> None:
        self.series.append((np.asarray(xs, dtype=float), np.asarray(ys, dtype=float), label))

    def steps(self, xs, ys, label: str, end: float) -> None:
        """Right-continuous step function: value ys[i] on [xs[i], xs[i+1]), last piece up to ``end``."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        right = np.append(xs[1:], end)
        px = np.column_stack([xs, right]).ravel()
        py = np.column_stack([ys, ys]).ravel()
        self.series.append((px, py, label))

    def render(self) -> str:
        finite = [(x[np.isfinite(x) & np.isfinite(y)], y[np.isfinite(x) & np.isfinite(y)]) for x, y, _ in self.series]
        allx = np.concatenate([x for x, _ in finite] or [np.zeros(1)])
        ally = np.concatenate([y for _, y in finite] or [np.zeros(1)])
        x0, x1 = float(allx.min()), float(allx.max())
        y0, y1 = min(0.0, float(ally.min())), float(ally.max())
        x1 = x1 if x1 > x0 else x0 + 1.0
        y1 = y1 if y1 > y0 else y0 + 1.0
        m, w, h = self.margin, self.width, self.height

        def sx(v):
            return m + (v - x0) / (x1 - x0) * (w - 2 * m)

        def sy(v):
            return h - m - (v - y0) / (y1 - y0) * (h - 2 * m)

        out = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
            f'<rect width="{w}" height="{h}" fill="white"/>',
            f'<text x="{w / 2:.1f}" y="{m / 2:.1f}" text-anchor="middle" font-size="14">{escape(self.title)}</text>',
            f'<line x1="{m}" y1="{h - m}" x2="{w - m}" y2="{h - m}" stroke="black"/>',
            f'<line x1="{m}" y1="{m}" x2="{m}" y2="{h - m}" stroke="black"/>',
            f'<text x="{m}" y="{h - m + 16}" font-size="11">{x0:.3g}</text>',
            f'<text x="{w - m}" y="{h - m + 16}" font-size="11" text-anchor="end">{x1:.3g}</text>',
            f'<text x="{m - 4}" y="{h - m}" font-size="11" text-anchor="end">{y0:.3g}</text>',
            f'<text x="{m - 4}" y="{m + 4}" font-size="11" text-anchor="end">{y1:.3g}</text>',
        ]
        for i, ((x, y), (_, _, label)) in enumerate(zip(finite, self.series)):
            color = PALETTE[i % len(PALETTE)]
            pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
            out.append(
                f'<text x="{w - m + 4 - 120}" y="{m + 16 * (i + 1)}" font-size="11" fill="{color}">{escape(label)}</text>'
            )
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(self.render())
        return path
