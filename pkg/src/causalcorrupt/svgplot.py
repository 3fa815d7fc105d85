"""Minimal SVG line charts with no plotting dependencies.

Output is a plain XML string: axes, ticks, one polyline per series, point
markers, and a legend. Series values of None leave a gap in the line.
"""

from __future__ import annotations

import os
from xml.sax.saxutils import escape

SERIES_COLORS = (
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#9467bd",
    "#ff7f0e",
    "#8c564b",
    "#17becf",
    "#e377c2",
    "#7f7f7f",
    "#bcbd22",
)

_MARGIN_LEFT = 64.0
_MARGIN_RIGHT = 18.0
_MARGIN_TOP = 40.0
_MARGIN_BOTTOM = 52.0


def _data_range(values: list[float]) -> tuple[float, float]:
    lo = min(values)
    hi = max(values)
    if hi - lo < 1e-12:
        lo -= 0.5
        hi += 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _fmt(value: float) -> str:
    return f"{value:.6g}"


def render_line_chart(
    series: dict[str, list[tuple[float, float | None]]],
    title: str = "",
    x_label: str = "",
    y_label: str = "",
    width: int = 720,
    height: int = 440,
) -> str:
    """Render named (x, y) series to an SVG document string."""
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts if y is not None]
    if not xs:
        xs = [0.0, 1.0]
    if not ys:
        ys = [0.0, 1.0]
    x_lo, x_hi = _data_range([float(v) for v in xs])
    y_lo, y_hi = _data_range([float(v) for v in ys])
    plot_w = width - _MARGIN_LEFT - _MARGIN_RIGHT
    plot_h = height - _MARGIN_TOP - _MARGIN_BOTTOM

    def px(x: float) -> float:
        return _MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y: float) -> float:
        return _MARGIN_TOP + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        parts.append(
            f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" '
            f'font-family="sans-serif" font-size="15" fill="#222">{escape(title)}</text>'
        )

    # Axes and ticks.
    x0, y0 = _MARGIN_LEFT, _MARGIN_TOP + plot_h
    parts.append(
        f'<line x1="{x0:.1f}" y1="{y0:.1f}" x2="{x0 + plot_w:.1f}" y2="{y0:.1f}" '
        f'stroke="#444" stroke-width="1"/>'
    )
    parts.append(
        f'<line x1="{x0:.1f}" y1="{_MARGIN_TOP:.1f}" x2="{x0:.1f}" y2="{y0:.1f}" '
        f'stroke="#444" stroke-width="1"/>'
    )
    n_ticks = 5
    for i in range(n_ticks + 1):
        tx = x_lo + (x_hi - x_lo) * i / n_ticks
        cx = px(tx)
        parts.append(f'<line x1="{cx:.1f}" y1="{y0:.1f}" x2="{cx:.1f}" y2="{y0 + 5:.1f}" stroke="#444"/>')
        parts.append(
            f'<text x="{cx:.1f}" y="{y0 + 19:.1f}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11" fill="#222">{escape(_fmt(tx))}</text>'
        )
        ty = y_lo + (y_hi - y_lo) * i / n_ticks
        cy = py(ty)
        parts.append(f'<line x1="{x0 - 5:.1f}" y1="{cy:.1f}" x2="{x0:.1f}" y2="{cy:.1f}" stroke="#444"/>')
        parts.append(
            f'<text x="{x0 - 8:.1f}" y="{cy + 3.5:.1f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11" fill="#222">{escape(_fmt(ty))}</text>'
        )
        parts.append(
            f'<line x1="{x0:.1f}" y1="{cy:.1f}" x2="{x0 + plot_w:.1f}" y2="{cy:.1f}" '
            f'stroke="#ddd" stroke-width="0.5"/>'
        )
    if x_label:
        parts.append(
            f'<text x="{x0 + plot_w / 2:.1f}" y="{height - 12:.1f}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12" fill="#222">{escape(x_label)}</text>'
        )
    if y_label:
        cy = _MARGIN_TOP + plot_h / 2
        parts.append(
            f'<text x="16" y="{cy:.1f}" text-anchor="middle" font-family="sans-serif" '
            f'font-size="12" fill="#222" transform="rotate(-90 16 {cy:.1f})">{escape(y_label)}</text>'
        )

    # Series lines (gaps where y is None) plus point markers.
    for idx, (name, pts) in enumerate(series.items()):
        color = SERIES_COLORS[idx % len(SERIES_COLORS)]
        path = []
        pen_down = False
        for x, y in pts:
            if y is None:
                pen_down = False
                continue
            cmd = "L" if pen_down else "M"
            path.append(f"{cmd}{px(float(x)):.2f} {py(float(y)):.2f}")
            pen_down = True
        if path:
            parts.append(
                f'<path d="{" ".join(path)}" fill="none" stroke="{color}" stroke-width="1.8"/>'
            )
        for x, y in pts:
            if y is not None:
                parts.append(
                    f'<circle cx="{px(float(x)):.2f}" cy="{py(float(y)):.2f}" r="3" fill="{color}"/>'
                )

    # Legend, top right inside the plot area.
    for idx, name in enumerate(series):
        color = SERIES_COLORS[idx % len(SERIES_COLORS)]
        ly = _MARGIN_TOP + 10 + idx * 16
        lx = x0 + plot_w - 150
        parts.append(f'<rect x="{lx:.1f}" y="{ly - 8:.1f}" width="12" height="8" fill="{color}"/>')
        parts.append(
            f'<text x="{lx + 17:.1f}" y="{ly:.1f}" font-family="sans-serif" '
            f'font-size="11" fill="#222">{escape(str(name))}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(svg: str, path: str) -> str:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)
    return path
