"""Minimal deterministic SVG charts on a fixed 800x600 canvas."""

from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 800, 600
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 80, 40, 50, 70
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f")


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _range(values: Sequence[float], pad: float = 0.05) -> tuple[float, float]:
    lo, hi = min(values), max(values)
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    span = hi - lo
    return lo - pad * span, hi + pad * span


class _Canvas:
    def __init__(self, title: str, xlabel: str, ylabel: str, xr: tuple[float, float], yr: tuple[float, float],
                 comment: str | None = None):
        self.xr, self.yr = xr, yr
        self.parts = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}">',
        ]
        if comment:
            self.parts.append(f"<desc>{escape(comment)}</desc>")
        self.parts.append(f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>')
        self.parts.append(f'<text x="{WIDTH / 2:.0f}" y="30" text-anchor="middle" font-size="18">{escape(title)}</text>')
        self._axes(xlabel, ylabel)

    def x(self, value: float) -> float:
        lo, hi = self.xr
        return MARGIN_LEFT + (value - lo) / (hi - lo) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)

    def y(self, value: float) -> float:
        lo, hi = self.yr
        return HEIGHT - MARGIN_BOTTOM - (value - lo) / (hi - lo) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)

    def _axes(self, xlabel: str, ylabel: str) -> None:
        x0, y0 = MARGIN_LEFT, HEIGHT - MARGIN_BOTTOM
        self.parts.append(f'<line x1="{x0}" y1="{y0}" x2="{WIDTH - MARGIN_RIGHT}" y2="{y0}" stroke="black"/>')
        self.parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{MARGIN_TOP}" stroke="black"/>')
        for k in range(6):
            xv = self.xr[0] + k * (self.xr[1] - self.xr[0]) / 5
            yv = self.yr[0] + k * (self.yr[1] - self.yr[0]) / 5
            self.parts.append(f'<text x="{_fmt(self.x(xv))}" y="{y0 + 20}" text-anchor="middle" font-size="12">{xv:.3g}</text>')
            self.parts.append(f'<text x="{x0 - 8}" y="{_fmt(self.y(yv) + 4)}" text-anchor="end" font-size="12">{yv:.3g}</text>')
        self.parts.append(f'<text x="{WIDTH / 2:.0f}" y="{HEIGHT - 20}" text-anchor="middle" font-size="14">{escape(xlabel)}</text>')
        self.parts.append(f'<text x="20" y="{HEIGHT / 2:.0f}" text-anchor="middle" font-size="14" '
                          f'transform="rotate(-90 20 {HEIGHT / 2:.0f})">{escape(ylabel)}</text>')

    def legend(self, labels: Sequence[str]) -> None:
        for k, label in enumerate(labels):
            y = MARGIN_TOP + 10 + 18 * k
            color = PALETTE[k % len(PALETTE)]
            self.parts.append(f'<rect x="{WIDTH - 230}" y="{y - 9}" width="12" height="12" fill="{color}"/>')
            self.parts.append(f'<text x="{WIDTH - 212}" y="{y + 2}" font-size="12">{escape(label)}</text>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def line_chart(series: Sequence[tuple[str, Sequence[tuple[float, float]]]], title: str, xlabel: str, ylabel: str,
               xr: tuple[float, float] | None = None, yr: tuple[float, float] | None = None,
               comment: str | None = None, markers: bool = False) -> str:
    """One polyline per ``(label, points)`` series, in the given order."""
    xs = [x for _, pts in series for x, _ in pts]
    ys = [y for _, pts in series for _, y in pts]
    canvas = _Canvas(title, xlabel, ylabel, xr or _range(xs), yr or _range(ys), comment)
    for k, (_, pts) in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        path = " ".join(f"{_fmt(canvas.x(x))},{_fmt(canvas.y(y))}" for x, y in pts)
        canvas.parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{path}"/>')
        if markers:
            for x, y in pts:
                canvas.parts.append(f'<circle cx="{_fmt(canvas.x(x))}" cy="{_fmt(canvas.y(y))}" r="3" fill="{color}"/>')
    canvas.legend([label for label, _ in series])
    return canvas.render()


def scatter_chart(points: Sequence[tuple[str, float, float, bool]], title: str, xlabel: str, ylabel: str,
                  comment: str | None = None, connect_highlighted: bool = True) -> str:
    """Labelled points ``(label, x, y, highlighted)``; highlighted ones are filled and joined."""
    xs = [p[1] for p in points]
    ys = [p[2] for p in points]
    canvas = _Canvas(title, xlabel, ylabel, _range(xs, 0.15), _range(ys, 0.15), comment)
    front = sorted((p for p in points if p[3]), key=lambda p: (p[1], p[2]))
    if connect_highlighted and len(front) > 1:
        path = " ".join(f"{_fmt(canvas.x(x))},{_fmt(canvas.y(y))}" for _, x, y, _ in front)
        canvas.parts.append(f'<polyline fill="none" stroke="{PALETTE[0]}" stroke-dasharray="4 3" points="{path}"/>')
    for label, x, y, hi in points:
        cx, cy = _fmt(canvas.x(x)), _fmt(canvas.y(y))
        fill = PALETTE[0] if hi else "white"
        canvas.parts.append(f'<circle cx="{cx}" cy="{cy}" r="6" fill="{fill}" stroke="{PALETTE[0]}" stroke-width="2"/>')
        canvas.parts.append(f'<text x="{_fmt(canvas.x(x) + 9)}" y="{_fmt(canvas.y(y) - 9)}" font-size="12">{escape(label)}</text>')
    return canvas.render()
