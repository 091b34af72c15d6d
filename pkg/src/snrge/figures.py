"""Static SVG scatter and line charts with companion CSV files.

The SVG is assembled from formatted strings only, so re-rendering the same
data produces byte-identical output.
"""

import csv
from pathlib import Path

from .tsne import Projection2D

_WIDTH, _HEIGHT = 640, 480
_MARGIN_LEFT, _MARGIN_RIGHT = 70, 150
_MARGIN_TOP, _MARGIN_BOTTOM = 30, 50

_PALETTE = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78",
    "#98df8a", "#ff9896", "#c5b0d5", "#c49c94", "#f7b6d2", "#c7c7c7",
    "#dbdb8d", "#9edae5", "#393b79", "#637939", "#8c6d31", "#843c39",
    "#7b4173", "#5254a3", "#bd9e39", "#ad494a",
]


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _axis_range(values):
    lo, hi = min(values), max(values)
    if lo == hi:
        lo, hi = lo - 1.0, hi + 1.0
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _ticks(lo: float, hi: float, count: int = 5):
    step = (hi - lo) / (count - 1)
    return [lo + i * step for i in range(count)]


class _Canvas:
    def __init__(self, x_range, y_range, title, xlabel, ylabel):
        self.x0, self.x1 = x_range
        self.y0, self.y1 = y_range
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
            f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
            f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
            f'<text x="{_WIDTH // 2}" y="20" text-anchor="middle" font-family="sans-serif" '
            f'font-size="14">{title}</text>',
        ]
        self._frame(xlabel, ylabel)

    def px(self, x: float) -> float:
        span = self.x1 - self.x0
        frac = (x - self.x0) / span
        return _MARGIN_LEFT + frac * (_WIDTH - _MARGIN_LEFT - _MARGIN_RIGHT)

    def py(self, y: float) -> float:
        span = self.y1 - self.y0
        frac = (y - self.y0) / span
        return _HEIGHT - _MARGIN_BOTTOM - frac * (_HEIGHT - _MARGIN_TOP - _MARGIN_BOTTOM)

    def _frame(self, xlabel, ylabel):
        left, right = _MARGIN_LEFT, _WIDTH - _MARGIN_RIGHT
        top, bottom = _MARGIN_TOP, _HEIGHT - _MARGIN_BOTTOM
        self.parts.append(
            f'<rect x="{left}" y="{top}" width="{right - left}" height="{bottom - top}" '
            f'fill="none" stroke="#333333"/>'
        )
        for tx in _ticks(self.x0, self.x1):
            x = self.px(tx)
            self.parts.append(
                f'<line x1="{_fmt(x)}" y1="{bottom}" x2="{_fmt(x)}" y2="{bottom + 5}" stroke="#333333"/>'
            )
            self.parts.append(
                f'<text x="{_fmt(x)}" y="{bottom + 18}" text-anchor="middle" '
                f'font-family="sans-serif" font-size="10">{_fmt(tx)}</text>'
            )
        for ty in _ticks(self.y0, self.y1):
            y = self.py(ty)
            self.parts.append(
                f'<line x1="{left - 5}" y1="{_fmt(y)}" x2="{left}" y2="{_fmt(y)}" stroke="#333333"/>'
            )
            self.parts.append(
                f'<text x="{left - 8}" y="{_fmt(y + 3)}" text-anchor="end" '
                f'font-family="sans-serif" font-size="10">{_fmt(ty)}</text>'
            )
        self.parts.append(
            f'<text x="{(left + right) // 2}" y="{_HEIGHT - 10}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12">{xlabel}</text>'
        )
        self.parts.append(
            f'<text x="18" y="{(top + bottom) // 2}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12" '
            f'transform="rotate(-90 18 {(top + bottom) // 2})">{ylabel}</text>'
        )

    def legend(self, names):
        x = _WIDTH - _MARGIN_RIGHT + 12
        for i, name in enumerate(names):
            y = _MARGIN_TOP + 14 + 16 * i
            color = _PALETTE[i % len(_PALETTE)]
            self.parts.append(f'<rect x="{x}" y="{y - 8}" width="10" height="10" fill="{color}"/>')
            self.parts.append(
                f'<text x="{x + 15}" y="{y}" font-family="sans-serif" font-size="11" '
                f'class="legend-entry">{name}</text>'
            )

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def emit_scatter(proj: Projection2D, path, title: str = "Embedding projection") -> None:
    """Write a labeled scatter SVG plus a CSV of the plotted points."""
    points = proj.points
    if len(points) == 0:
        raise ValueError("nothing to plot")
    names = []
    for lb in proj.labels:
        text = str(lb)
        if text not in names:
            names.append(text)
    canvas = _Canvas(
        _axis_range(points[:, 0]), _axis_range(points[:, 1]), title, "component 1", "component 2"
    )
    for x, y, lb in zip(points[:, 0], points[:, 1], proj.labels):
        color = _PALETTE[names.index(str(lb)) % len(_PALETTE)]
        canvas.parts.append(
            f'<circle cx="{_fmt(canvas.px(x))}" cy="{_fmt(canvas.py(y))}" r="2.5" '
            f'fill="{color}" fill-opacity="0.7"/>'
        )
    canvas.legend(names)
    path = Path(path)
    path.write_text(canvas.render(), encoding="utf-8")
    with open(path.with_suffix(".csv"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "label"])
        for x, y, lb in zip(points[:, 0], points[:, 1], proj.labels):
            writer.writerow([repr(float(x)), repr(float(y)), str(lb)])


def emit_line_chart(series, path, title: str = "", xlabel: str = "x", ylabel: str = "y") -> None:
    """Write labeled polylines as an SVG plus a CSV of the plotted values.

    `series` is a sequence of (name, xs, ys) triples.
    """
    series = [(str(name), list(xs), list(ys)) for name, xs, ys in series]
    if not series or all(len(xs) == 0 for _, xs, _ in series):
        raise ValueError("nothing to plot")
    all_x = [x for _, xs, _ in series for x in xs]
    all_y = [y for _, _, ys in series for y in ys]
    canvas = _Canvas(_axis_range(all_x), _axis_range(all_y), title, xlabel, ylabel)
    for i, (name, xs, ys) in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        coords = " ".join(f"{_fmt(canvas.px(x))},{_fmt(canvas.py(y))}" for x, y in zip(xs, ys))
        canvas.parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        for x, y in zip(xs, ys):
            canvas.parts.append(
                f'<circle cx="{_fmt(canvas.px(x))}" cy="{_fmt(canvas.py(y))}" r="3" fill="{color}"/>'
            )
    canvas.legend([name for name, _, _ in series])
    path = Path(path)
    path.write_text(canvas.render(), encoding="utf-8")
    with open(path.with_suffix(".csv"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["series", "x", "y"])
        for name, xs, ys in series:
            for x, y in zip(xs, ys):
                writer.writerow([name, repr(float(x)), repr(float(y))])
