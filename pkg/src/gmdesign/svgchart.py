"""Minimal deterministic SVG 1.1 line and scatter charts.

Hand-rolled on purpose: the experiment outputs must be byte-identical
across runs and carry no plotting-library dependence.  Only the two chart
kinds the experiments need are provided.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

__all__ = ["line_chart", "scatter_panels"]

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

_WIDTH, _HEIGHT = 640, 440
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 64, 16, 28, 44


def _fmt(v: float) -> str:
    return format(float(v), ".6g")


def _span(values):
    lo, hi = min(values), max(values)
    if hi <= lo:
        pad = 1.0 if lo == 0 else abs(lo) * 0.1
        return lo - pad, hi + pad
    pad = (hi - lo) * 0.05
    return lo - pad, hi + pad


def _scale(lo, hi, a, b):
    return lambda v: a + (v - lo) * (b - a) / (hi - lo)


def _axes(parts, sx, sy, x_lo, x_hi, y_lo, y_hi, x_label, y_label, top, bottom):
    left, right = _MARGIN_L, _WIDTH - _MARGIN_R
    parts.append(
        f'<rect x="{left}" y="{top}" width="{right - left}" '
        f'height="{bottom - top}" fill="none" stroke="#333333"/>'
    )
    for i in range(6):
        xv = x_lo + (x_hi - x_lo) * i / 5
        yv = y_lo + (y_hi - y_lo) * i / 5
        px, py = sx(xv), sy(yv)
        parts.append(
            f'<line x1="{_fmt(px)}" y1="{bottom}" x2="{_fmt(px)}" y2="{bottom + 4}" stroke="#333333"/>'
        )
        parts.append(
            f'<text x="{_fmt(px)}" y="{bottom + 16}" font-size="10" '
            f'text-anchor="middle" font-family="sans-serif">{_fmt(round(xv, 6))}</text>'
        )
        parts.append(
            f'<line x1="{left - 4}" y1="{_fmt(py)}" x2="{left}" y2="{_fmt(py)}" stroke="#333333"/>'
        )
        parts.append(
            f'<text x="{left - 6}" y="{_fmt(py + 3)}" font-size="10" '
            f'text-anchor="end" font-family="sans-serif">{_fmt(round(yv, 6))}</text>'
        )
    parts.append(
        f'<text x="{(left + right) / 2}" y="{bottom + 32}" font-size="12" '
        f'text-anchor="middle" font-family="sans-serif">{escape(x_label)}</text>'
    )
    parts.append(
        f'<text x="14" y="{(top + bottom) / 2}" font-size="12" text-anchor="middle" '
        f'font-family="sans-serif" transform="rotate(-90 14 {(top + bottom) / 2})">'
        f"{escape(y_label)}</text>"
    )


def line_chart(series, x_label: str, y_label: str, title: str = "") -> str:
    """SVG line chart; ``series`` is a list of (label, xs, ys) triples."""
    if not series:
        raise ValueError("line_chart needs at least one series")
    xs_all = [x for _, xs, _ in series for x in xs]
    ys_all = [y for _, _, ys in series for y in ys]
    x_lo, x_hi = _span(xs_all)
    y_lo, y_hi = _span(ys_all)
    top, bottom = _MARGIN_T, _HEIGHT - _MARGIN_B
    sx = _scale(x_lo, x_hi, _MARGIN_L, _WIDTH - _MARGIN_R)
    sy = _scale(y_lo, y_hi, bottom, top)

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{_WIDTH}" height="{_HEIGHT}" viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="#ffffff"/>',
    ]
    if title:
        parts.append(
            f'<text x="{_WIDTH / 2}" y="18" font-size="13" text-anchor="middle" '
            f'font-family="sans-serif">{escape(title)}</text>'
        )
    _axes(parts, sx, sy, x_lo, x_hi, y_lo, y_hi, x_label, y_label, top, bottom)
    for idx, (label, xs, ys) in enumerate(series):
        color = _PALETTE[idx % len(_PALETTE)]
        pts = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in zip(xs, ys))
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        for x, y in zip(xs, ys):
            parts.append(
                f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="2" fill="{color}"/>'
            )
        ly = _MARGIN_T + 14 + 14 * idx
        lx = _WIDTH - _MARGIN_R - 150
        parts.append(
            f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{lx + 27}" y="{ly}" font-size="11" '
            f'font-family="sans-serif">{escape(label)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def scatter_panels(panels, x_label: str, y_label: str, title: str = "") -> str:
    """Vertically stacked scatter panels.

    ``panels`` is a list of (label, points) with points given as
    (x, y, class_index) triples; class index selects the marker color.
    """
    if not panels:
        raise ValueError("scatter_panels needs at least one panel")
    n_panels = len(panels)
    panel_h = 300
    height = _MARGIN_T + n_panels * panel_h + _MARGIN_B
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{_WIDTH}" height="{height}" viewBox="0 0 {_WIDTH} {height}">',
        f'<rect width="{_WIDTH}" height="{height}" fill="#ffffff"/>',
    ]
    if title:
        parts.append(
            f'<text x="{_WIDTH / 2}" y="18" font-size="13" text-anchor="middle" '
            f'font-family="sans-serif">{escape(title)}</text>'
        )
    for p_idx, (label, points) in enumerate(panels):
        top = _MARGIN_T + p_idx * panel_h + 18
        bottom = _MARGIN_T + (p_idx + 1) * panel_h - 24
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        x_lo, x_hi = _span(xs)
        y_lo, y_hi = _span(ys)
        sx = _scale(x_lo, x_hi, _MARGIN_L, _WIDTH - _MARGIN_R)
        sy = _scale(y_lo, y_hi, bottom, top)
        parts.append(
            f'<text x="{_WIDTH / 2}" y="{top - 5}" font-size="12" text-anchor="middle" '
            f'font-family="sans-serif">{escape(label)}</text>'
        )
        _axes(parts, sx, sy, x_lo, x_hi, y_lo, y_hi, x_label, y_label, top, bottom)
        for x, y, cls in points:
            color = _PALETTE[int(cls) % len(_PALETTE)]
            parts.append(
                f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="2" '
                f'fill="{color}" fill-opacity="0.7"/>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
