"""Dependency-free SVG figures (CE plane, CEAC, EVPI, trajectory panels).

Deliberately small: static line/scatter charts with linear axes, written as
plain SVG so test suites can diff them byte-for-byte.
"""
from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import numpy as np

__all__ = ["line_chart", "scatter_chart"]

_WIDTH, _HEIGHT = 640, 440
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 78, 20, 36, 56
_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    step = 10.0 ** np.floor(np.log10(span / n))
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= n:
            step *= mult
            break
    start = np.ceil(lo / step) * step
    return np.arange(start, hi + step / 2, step)


def _fmt(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1e5 or abs(v) < 1e-3:
        return f"{v:.1e}"
    return f"{v:g}"


class _Canvas:
    def __init__(self, xlim, ylim, title, xlabel, ylabel):
        self.xlim, self.ylim = xlim, ylim
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" '
            f'height="{_HEIGHT}" viewBox="0 0 {_WIDTH} {_HEIGHT}">',
            f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
            f'<text x="{_WIDTH / 2}" y="20" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">{title}</text>',
        ]
        self._axes(xlabel, ylabel)

    def x(self, v: float) -> float:
        lo, hi = self.xlim
        frac = (v - lo) / (hi - lo) if hi > lo else 0.5
        return _MARGIN_L + frac * (_WIDTH - _MARGIN_L - _MARGIN_R)

    def y(self, v: float) -> float:
        lo, hi = self.ylim
        frac = (v - lo) / (hi - lo) if hi > lo else 0.5
        return _HEIGHT - _MARGIN_B - frac * (_HEIGHT - _MARGIN_T - _MARGIN_B)

    def _axes(self, xlabel: str, ylabel: str) -> None:
        x0, x1 = _MARGIN_L, _WIDTH - _MARGIN_R
        y0, y1 = _HEIGHT - _MARGIN_B, _MARGIN_T
        self.parts.append(
            f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" '
            'fill="none" stroke="#444" stroke-width="1"/>'
        )
        for v in _ticks(*self.xlim):
            px = self.x(v)
            self.parts.append(
                f'<line x1="{px:.1f}" y1="{y0}" x2="{px:.1f}" y2="{y0 + 5}" stroke="#444"/>'
                f'<text x="{px:.1f}" y="{y0 + 20}" text-anchor="middle" '
                f'font-family="sans-serif" font-size="11">{_fmt(v)}</text>'
            )
        for v in _ticks(*self.ylim):
            py = self.y(v)
            self.parts.append(
                f'<line x1="{x0 - 5}" y1="{py:.1f}" x2="{x0}" y2="{py:.1f}" stroke="#444"/>'
                f'<text x="{x0 - 8}" y="{py + 4:.1f}" text-anchor="end" '
                f'font-family="sans-serif" font-size="11">{_fmt(v)}</text>'
            )
        self.parts.append(
            f'<text x="{(x0 + x1) / 2}" y="{_HEIGHT - 12}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12">{xlabel}</text>'
            f'<text x="16" y="{(y0 + y1) / 2}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12" '
            f'transform="rotate(-90 16 {(y0 + y1) / 2})">{ylabel}</text>'
        )

    def polyline(self, xs, ys, color: str) -> None:
        pts = " ".join(f"{self.x(a):.1f},{self.y(b):.1f}" for a, b in zip(xs, ys))
        self.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="1.6"/>'
        )

    def dots(self, xs, ys, color: str, radius: float = 2.0) -> None:
        for a, b in zip(xs, ys):
            self.parts.append(
                f'<circle cx="{self.x(a):.1f}" cy="{self.y(b):.1f}" '
                f'r="{radius}" fill="{color}" fill-opacity="0.55"/>'
            )

    def legend(self, labels_colors) -> None:
        y = _MARGIN_T + 14
        for label, color in labels_colors:
            self.parts.append(
                f'<line x1="{_MARGIN_L + 10}" y1="{y}" x2="{_MARGIN_L + 34}" '
                f'y2="{y}" stroke="{color}" stroke-width="2"/>'
                f'<text x="{_MARGIN_L + 40}" y="{y + 4}" font-family="sans-serif" '
                f'font-size="11">{label}</text>'
            )
            y += 16

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(self.parts + ["</svg>"]), encoding="utf-8")
        return path


def _limits(values: Sequence[np.ndarray], pad: float = 0.05) -> tuple[float, float]:
    lo = min(float(np.min(v)) for v in values if len(v))
    hi = max(float(np.max(v)) for v in values if len(v))
    if hi == lo:
        hi = lo + 1.0
    span = hi - lo
    return lo - pad * span, hi + pad * span


def line_chart(
    path: str | Path,
    series: Sequence[tuple[np.ndarray, np.ndarray, str]],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
) -> Path:
    """Write a multi-series line chart; series are (x, y, label) triples."""
    xlim = _limits([np.asarray(x) for x, _, _ in series], pad=0.0)
    ylim = _limits([np.asarray(y) for _, y, _ in series])
    canvas = _Canvas(xlim, ylim, title, xlabel, ylabel)
    labels = []
    for i, (x, y, label) in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        canvas.polyline(np.asarray(x), np.asarray(y), color)
        labels.append((label, color))
    canvas.legend(labels)
    return canvas.write(path)


def scatter_chart(
    path: str | Path,
    x: np.ndarray,
    y: np.ndarray,
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    rays: Sequence[tuple[float, str]] = (),
    markers: Sequence[tuple[float, float, str]] = (),
) -> Path:
    """Scatter plot with optional origin rays (slope, label) and markers.

    Rays draw y = slope * x across the panel, the usual way to show a
    willingness-to-pay threshold on a cost-effectiveness plane.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xlim = _limits([x, np.array([0.0])])
    ylim = _limits([y, np.array([0.0])])
    canvas = _Canvas(xlim, ylim, title, xlabel, ylabel)
    labels = []
    for i, (slope, label) in enumerate(rays):
        color = "#777"
        xs = np.array(xlim)
        canvas.polyline(xs, slope * xs, color)
        labels.append((label, color))
    canvas.dots(x, y, _PALETTE[0])
    for i, (mx, my, label) in enumerate(markers):
        color = _PALETTE[(i + 1) % len(_PALETTE)]
        canvas.dots([mx], [my], color, radius=5.0)
        labels.append((label, color))
    if labels:
        canvas.legend(labels)
    return canvas.write(path)
