"""Self-contained SVG figures: feature panels and functional boxplot bands.

Only the standard library is used to write the markup, so figures can be
produced anywhere the package runs.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .curves import FeatureStack
from .io import atomic_write_text

__all__ = ["feature_panels_svg", "boxplot_svg", "PALETTE"]

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")

_PANEL_W, _PANEL_H = 360, 240
_MARGIN = 36
_FEATURE_NAMES = {0: "trajectories", 1: "first derivatives", 2: "second derivatives"}


class _Axes:
    """Affine map from data coordinates into one panel."""

    def __init__(self, x0, y0, w, h, xlim, ylim):
        self.x0, self.y0, self.w, self.h = x0, y0, w, h
        self.xlim = xlim
        lo, hi = ylim
        if hi <= lo:
            lo, hi = lo - 0.5, hi + 0.5
        pad = 0.04 * (hi - lo)
        self.ylim = (lo - pad, hi + pad)

    def points(self, x, y):
        (xa, xb), (ya, yb) = self.xlim, self.ylim
        span = xb - xa if xb > xa else 1.0
        px = self.x0 + (np.asarray(x) - xa) / span * self.w
        py = self.y0 + self.h - (np.asarray(y) - ya) / (yb - ya) * self.h
        return " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))

    def frame(self, title):
        (xa, xb), (ya, yb) = self.xlim, self.ylim
        x0, y0, w, h = self.x0, self.y0, self.w, self.h
        return [
            f'<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="#444"/>',
            f'<text x="{x0 + w / 2}" y="{y0 - 8}" text-anchor="middle" '
            f'font-size="13">{escape(title)}</text>',
            f'<text x="{x0}" y="{y0 + h + 14}" font-size="10">{xa:.3g}</text>',
            f'<text x="{x0 + w}" y="{y0 + h + 14}" font-size="10" '
            f'text-anchor="end">{xb:.3g}</text>',
            f'<text x="{x0 - 4}" y="{y0 + 10}" font-size="10" text-anchor="end">{yb:.3g}</text>',
            f'<text x="{x0 - 4}" y="{y0 + h}" font-size="10" text-anchor="end">{ya:.3g}</text>',
        ]


def _document(width, height, body):
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif">')
    return "\n".join([head, f'<rect width="{width}" height="{height}" fill="white"/>',
                      *body, "</svg>"]) + "\n"


def _legend(x, y, labels, slots=None):
    slots = range(len(labels)) if slots is None else slots
    out = []
    for i, (lab, slot) in enumerate(zip(labels, slots)):
        colour = PALETTE[slot % len(PALETTE)]
        yy = y + 16 * i
        out.append(f'<rect x="{x}" y="{yy}" width="12" height="12" fill="{colour}"/>')
        out.append(f'<text x="{x + 18}" y="{yy + 11}" font-size="11">{escape(str(lab))}</text>')
    return out


def feature_panels_svg(stack: FeatureStack, labels, path=None, features=(0, 1, 2),
                       title=None) -> str:
    """One panel per feature with every curve coloured by its label."""
    labels = list(labels)
    distinct = sorted(set(labels), key=lambda v: (str(type(v)), v))
    colour_of = {lab: PALETTE[i % len(PALETTE)] for i, lab in enumerate(distinct)}
    features = tuple(features)
    top = 30 if title else 10
    width = len(features) * (_PANEL_W + 2 * _MARGIN) + 110
    height = _PANEL_H + 2 * _MARGIN + top
    body = []
    if title:
        body.append(f'<text x="{width / 2}" y="20" text-anchor="middle" '
                    f'font-size="15">{escape(title)}</text>')
    for p, l in enumerate(features):
        cs = stack[l]
        ax = _Axes(_MARGIN + p * (_PANEL_W + 2 * _MARGIN), top + _MARGIN, _PANEL_W, _PANEL_H,
                   (float(cs.grid[0]), float(cs.grid[-1])),
                   (float(cs.values.min()), float(cs.values.max())))
        body.extend(ax.frame(_FEATURE_NAMES.get(l, f"order {l}")))
        for r in range(cs.n):
            body.append(f'<polyline fill="none" stroke="{colour_of[labels[r]]}" '
                        f'stroke-width="0.8" stroke-opacity="0.7" '
                        f'points="{ax.points(cs.grid, cs.values[r])}"/>')
    body.extend(_legend(width - 100, top + _MARGIN, distinct))
    svg = _document(width, height, body)
    if path is not None:
        atomic_write_text(path, svg)
    return svg


def boxplot_svg(boxplots, path=None, title=None, names=None) -> str:
    """Whisker band, central region and median of each functional boxplot.

    All boxplots share one panel; ``None`` entries (clusters too small for
    a boxplot) are skipped.
    """
    items = [(i, fb) for i, fb in enumerate(boxplots) if fb is not None]
    names = list(names) if names is not None else [f"cluster {i}" for i in range(len(boxplots))]
    top = 30 if title else 10
    width = _PANEL_W + 2 * _MARGIN + 120
    height = _PANEL_H + 2 * _MARGIN + top
    body = []
    if title:
        body.append(f'<text x="{width / 2}" y="20" text-anchor="middle" '
                    f'font-size="15">{escape(title)}</text>')
    if items:
        grid = items[0][1].grid
        lo = min(float(fb.whisker_lower.min()) for _, fb in items)
        hi = max(float(fb.whisker_upper.max()) for _, fb in items)
        ax = _Axes(_MARGIN, top + _MARGIN, _PANEL_W, _PANEL_H,
                   (float(grid[0]), float(grid[-1])), (lo, hi))
        body.extend(ax.frame("functional boxplots"))
        for i, fb in items:
            colour = PALETTE[i % len(PALETTE)]
            body.append(_band(ax, fb.grid, fb.whisker_lower, fb.whisker_upper, colour, 0.15))
            body.append(_band(ax, fb.grid, fb.central_lower, fb.central_upper, colour, 0.4))
            body.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.6" '
                        f'points="{ax.points(fb.grid, fb.median)}"/>')
        body.extend(_legend(width - 110, top + _MARGIN, [names[i] for i, _ in items],
                             [i for i, _ in items]))
    svg = _document(width, height, body)
    if path is not None:
        atomic_write_text(path, svg)
    return svg


def _band(ax, grid, lower, upper, colour, opacity):
    xs = np.concatenate([grid, grid[::-1]])
    ys = np.concatenate([upper, lower[::-1]])
    return (f'<polygon fill="{colour}" fill-opacity="{opacity}" stroke="none" '
            f'points="{ax.points(xs, ys)}"/>')

