"""Self-contained SVG renderings: sweep heatmaps, certified-accuracy curves
and expectation scatter plots, each with optional region-boundary overlays.

Output is deterministic text with no external assets, so rendered files can
be diffed across runs like any other artifact.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence

import numpy as np

from .analysis import BoundarySegment, RegionMap, SweepGrid
from .mechanisms import MechanismId

MECHANISM_COLORS = {
    MechanismId.COHEN: "#1f77b4",
    MechanismId.LI: "#d62728",
    MechanismId.LECUYER: "#2ca02c",
    MechanismId.IMPROVED_DP: "#9467bd",
}
ENSEMBLE_COLOR = "#000000"

# compact viridis ramp; linear interpolation between stops
_VIRIDIS = (
    (0.267004, 0.004874, 0.329415), (0.282623, 0.140926, 0.457517),
    (0.253935, 0.265254, 0.529983), (0.206756, 0.371758, 0.553117),
    (0.163625, 0.471133, 0.558148), (0.127568, 0.566949, 0.550556),
    (0.134692, 0.658636, 0.517649), (0.266941, 0.748751, 0.440573),
    (0.477504, 0.821444, 0.318195), (0.741388, 0.873449, 0.149561),
    (0.993248, 0.906157, 0.143936),
)

_WIDTH, _HEIGHT = 640.0, 500.0
_ML, _MR, _MT, _MB = 64.0, 132.0, 36.0, 52.0


def _f(v: float) -> str:
    return f"{v:.2f}"


def _ramp(t: float) -> str:
    t = min(max(t, 0.0), 1.0)
    pos = t * (len(_VIRIDIS) - 1)
    i = min(int(pos), len(_VIRIDIS) - 2)
    frac = pos - i
    rgb = [(1 - frac) * a + frac * b for a, b in zip(_VIRIDIS[i], _VIRIDIS[i + 1])]
    return "#" + "".join(f"{int(round(255 * c)):02x}" for c in rgb)


class _Canvas:
    """Minimal SVG string builder with a fixed data-to-pixel transform."""

    def __init__(self, x_range: tuple[float, float], y_range: tuple[float, float],
                 title: str, xlabel: str, ylabel: str) -> None:
        self.x0, self.x1 = x_range
        self.y0, self.y1 = y_range
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH:g}" '
            f'height="{_HEIGHT:g}" viewBox="0 0 {_WIDTH:g} {_HEIGHT:g}">',
            f'<rect width="{_WIDTH:g}" height="{_HEIGHT:g}" fill="#ffffff"/>',
            f'<text x="{_ML + self.pw / 2:.2f}" y="22" font-size="15" '
            f'text-anchor="middle" font-family="sans-serif">{_esc(title)}</text>',
        ]
        self._axes(xlabel, ylabel)

    @property
    def pw(self) -> float:
        return _WIDTH - _ML - _MR

    @property
    def ph(self) -> float:
        return _HEIGHT - _MT - _MB

    def px(self, x: float) -> float:
        span = self.x1 - self.x0 or 1.0
        return _ML + (x - self.x0) / span * self.pw

    def py(self, y: float) -> float:
        span = self.y1 - self.y0 or 1.0
        return _MT + self.ph - (y - self.y0) / span * self.ph

    def _axes(self, xlabel: str, ylabel: str) -> None:
        p = self.parts
        p.append(f'<rect x="{_ML:g}" y="{_MT:g}" width="{self.pw:.2f}" '
                 f'height="{self.ph:.2f}" fill="none" stroke="#444444"/>')
        for t in np.linspace(self.x0, self.x1, 6):
            x = self.px(float(t))
            p.append(f'<line x1="{_f(x)}" y1="{_f(_MT + self.ph)}" x2="{_f(x)}" '
                     f'y2="{_f(_MT + self.ph + 4)}" stroke="#444444"/>')
            p.append(f'<text x="{_f(x)}" y="{_f(_MT + self.ph + 17)}" font-size="11" '
                     f'text-anchor="middle" font-family="sans-serif">{t:.3g}</text>')
        for t in np.linspace(self.y0, self.y1, 6):
            y = self.py(float(t))
            p.append(f'<line x1="{_f(_ML - 4)}" y1="{_f(y)}" x2="{_f(_ML)}" '
                     f'y2="{_f(y)}" stroke="#444444"/>')
            p.append(f'<text x="{_f(_ML - 7)}" y="{_f(y + 4)}" font-size="11" '
                     f'text-anchor="end" font-family="sans-serif">{t:.3g}</text>')
        p.append(f'<text x="{_f(_ML + self.pw / 2)}" y="{_f(_HEIGHT - 14)}" '
                 f'font-size="13" text-anchor="middle" font-family="sans-serif">'
                 f'{_esc(xlabel)}</text>')
        p.append(f'<text x="16" y="{_f(_MT + self.ph / 2)}" font-size="13" '
                 f'text-anchor="middle" font-family="sans-serif" '
                 f'transform="rotate(-90 16 {_f(_MT + self.ph / 2)})">{_esc(ylabel)}</text>')

    def rect(self, x: float, y: float, w: float, h: float, color: str) -> None:
        self.parts.append(
            f'<rect x="{_f(self.px(x))}" y="{_f(self.py(y + h))}" '
            f'width="{_f(self.px(x + w) - self.px(x))}" '
            f'height="{_f(self.py(y) - self.py(y + h))}" fill="{color}"/>')

    def line(self, x1: float, y1: float, x2: float, y2: float, color: str,
             width: float = 1.5) -> None:
        self.parts.append(
            f'<line x1="{_f(self.px(x1))}" y1="{_f(self.py(y1))}" '
            f'x2="{_f(self.px(x2))}" y2="{_f(self.py(y2))}" stroke="{color}" '
            f'stroke-width="{width:g}"/>')

    def polyline(self, pts: Sequence[tuple[float, float]], color: str,
                 width: float = 1.8) -> None:
        coords = " ".join(f"{_f(self.px(x))},{_f(self.py(y))}" for x, y in pts)
        self.parts.append(f'<polyline points="{coords}" fill="none" '
                          f'stroke="{color}" stroke-width="{width:g}"/>')

    def dot(self, x: float, y: float, color: str, r: float = 2.2) -> None:
        self.parts.append(f'<circle cx="{_f(self.px(x))}" cy="{_f(self.py(y))}" '
                          f'r="{r:g}" fill="{color}" fill-opacity="0.8"/>')

    def raw(self, s: str) -> None:
        self.parts.append(s)

    def legend(self, entries: Sequence[tuple[str, str]]) -> None:
        x = _ML + self.pw + 14
        y = _MT + 8
        for label, color in entries:
            self.parts.append(f'<rect x="{_f(x)}" y="{_f(y - 9)}" width="14" '
                              f'height="10" fill="{color}"/>')
            self.parts.append(f'<text x="{_f(x + 19)}" y="{_f(y)}" font-size="11" '
                              f'font-family="sans-serif">{_esc(label)}</text>')
            y += 17

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _boundary_color(seg: BoundarySegment) -> str:
    # figure convention: boundary of the Cohen region is blue, Li red
    if MechanismId.COHEN in (seg.a, seg.b):
        return MECHANISM_COLORS[MechanismId.COHEN]
    if MechanismId.LI in (seg.a, seg.b):
        return MECHANISM_COLORS[MechanismId.LI]
    return "#777777"


def _overlay(canvas: _Canvas, boundaries: Iterable[BoundarySegment]) -> None:
    for seg in boundaries:
        canvas.line(seg.x1, seg.y1, seg.x2, seg.y2, _boundary_color(seg), 1.4)


def heatmap_svg(matrix: np.ndarray, e0_axis: np.ndarray, e1_axis: np.ndarray,
                title: str, boundaries: Iterable[BoundarySegment] = ()) -> str:
    """Heatmap of a sweep matrix over (e0, e1); masked cells left blank."""
    finite = matrix[np.isfinite(matrix)]
    vmin = float(finite.min()) if finite.size else 0.0
    vmax = float(finite.max()) if finite.size else 1.0
    span = vmax - vmin or 1.0
    h0 = float(e0_axis[1] - e0_axis[0]) if len(e0_axis) > 1 else 1.0
    h1 = float(e1_axis[1] - e1_axis[0]) if len(e1_axis) > 1 else 1.0
    c = _Canvas((float(e0_axis[0]) - h0 / 2, float(e0_axis[-1]) + h0 / 2),
                (float(e1_axis[0]) - h1 / 2, float(e1_axis[-1]) + h1 / 2),
                title, "e0", "e1")
    for i, e0 in enumerate(e0_axis):
        for j, e1 in enumerate(e1_axis):
            v = matrix[i, j]
            if not np.isfinite(v):
                continue
            c.rect(float(e0) - h0 / 2, float(e1) - h1 / 2, h0, h1,
                   _ramp((float(v) - vmin) / span))
    _overlay(c, boundaries)
    # colorbar
    bx = _ML + c.pw + 22
    steps = 48
    bh = c.ph * 0.7
    by = _MT + (c.ph - bh) / 2
    for k in range(steps):
        c.raw(f'<rect x="{_f(bx)}" y="{_f(by + bh - (k + 1) * bh / steps)}" '
              f'width="14" height="{_f(bh / steps + 0.5)}" fill="{_ramp(k / (steps - 1))}"/>')
    c.raw(f'<text x="{_f(bx + 18)}" y="{_f(by + bh)}" font-size="11" '
          f'font-family="sans-serif">{vmin:.3g}</text>')
    c.raw(f'<text x="{_f(bx + 18)}" y="{_f(by + 8)}" font-size="11" '
          f'font-family="sans-serif">{vmax:.3g}</text>')
    return c.render()


def curves_svg(curves: Sequence[tuple[str, str, Sequence[tuple[float, float]]]],
               title: str) -> str:
    """Step plot of certified-accuracy curves: (label, color, points) each."""
    xmax = 0.0
    for _, _, pts in curves:
        for r, _ in pts:
            xmax = max(xmax, r)
    c = _Canvas((0.0, xmax or 1.0), (0.0, 1.0), title, "radius r",
                "certified accuracy")
    for label, color, pts in curves:
        if not pts:
            continue
        step: list[tuple[float, float]] = []
        prev = None
        for r, acc in pts:
            if prev is not None:
                step.append((r, prev))
            step.append((r, acc))
            prev = acc
        if prev is not None and step[-1][0] < xmax:
            step.append((xmax, prev))
        c.polyline(step, color)
    c.legend([(label, color) for label, color, _ in curves])
    return c.render()


def scatter_svg(points: Sequence[tuple[float, float, MechanismId | None]],
                title: str, boundaries: Iterable[BoundarySegment] = ()) -> str:
    """Samples on the (e0, e1) simplex projection, colored by their winning
    mechanism, with region boundaries overlaid."""
    c = _Canvas((0.0, 1.0), (0.0, 1.0), title, "e0", "e1")
    # feasible-region frame: e1 = e0 and e0 + e1 = 1
    c.line(0.0, 0.0, 0.5, 0.5, "#bbbbbb", 1.0)
    c.line(0.5, 0.5, 1.0, 0.0, "#bbbbbb", 1.0)
    _overlay(c, boundaries)
    seen: dict[MechanismId | None, str] = {}
    for e0, e1, mech in points:
        color = MECHANISM_COLORS.get(mech, "#555555")
        seen[mech] = color
        c.dot(e0, e1, color)
    c.legend([(m.value if m else "none", col) for m, col in
              sorted(seen.items(), key=lambda kv: kv[0].value if kv[0] else "~")])
    return c.render()
