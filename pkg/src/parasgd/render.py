"""Static SVG charts built from plain strings: a speedup heatmap and line charts."""

import math
from typing import List, Optional, Sequence, Tuple

from parasgd.analysis import SweepGrid

COLORS = [
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#ff7f0e",
    "#9467bd",
    "#8c564b",
]
UNREACHED_FILL = "#d9d9d9"
UNREACHED_MARK = "not reached"
FONT = 'font-family="Arial"'

Series = Tuple[str, Sequence[Tuple[float, float]]]


def _escape(text: str) -> str:
    return (
        text.replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
        .replace("'", "&#39;")
    )


def _open(width: int, height: int) -> List[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        '<rect x="0" y="0" width="100%" height="100%" fill="#ffffff"/>',
    ]


def _text(x: float, y: float, text: str, size: int = 13, anchor: str = "middle", extra="") -> str:
    return (
        f'<text x="{x:.2f}" y="{y:.2f}" text-anchor="{anchor}" font-size="{size}" {FONT}'
        f"{extra}>{_escape(text)}</text>"
    )


def _blend(fraction: float) -> str:
    """White to dark blue"""
    fraction = min(max(fraction, 0.0), 1.0)
    low, high = (255, 255, 255), (8, 48, 107)
    r, g, b = (round(lo + (hi - lo) * fraction) for lo, hi in zip(low, high))
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap_svg(grid: SweepGrid, title: str = "Zero-overhead speedup") -> str:
    """Rows are K, columns tau; unreached cells are grey and labelled"""
    cell_w, cell_h = 90, 48
    margin_left, margin_top, margin_right, margin_bottom = 80, 70, 30, 60
    width = margin_left + cell_w * len(grid.taus) + margin_right
    height = margin_top + cell_h * len(grid.workers) + margin_bottom

    values = [v for row in grid.matrix() for v in row if v is not None]
    top = max(values) if values else 1.0
    top = top if top > 0 else 1.0

    lines = _open(width, height)
    lines.append(_text(width / 2, 32, title, size=18))
    lines.append(_text(margin_left + cell_w * len(grid.taus) / 2, height - 18, "tau"))
    lines.append(
        _text(
            22,
            margin_top + cell_h * len(grid.workers) / 2,
            "K",
            extra=f' transform="rotate(-90 22 {margin_top + cell_h * len(grid.workers) / 2:.2f})"',
        )
    )

    for j, tau in enumerate(grid.taus):
        lines.append(_text(margin_left + (j + 0.5) * cell_w, margin_top - 10, str(tau)))
    for i, K in enumerate(grid.workers):
        y = margin_top + i * cell_h
        lines.append(_text(margin_left - 12, y + cell_h / 2 + 5, str(K), anchor="end"))
        for j, tau in enumerate(grid.taus):
            x = margin_left + j * cell_w
            speedup = grid.cell(K, tau).speedup
            if speedup is None:
                fill, label, ink = UNREACHED_FILL, UNREACHED_MARK, "#555555"
            else:
                fraction = speedup / top
                fill, label = _blend(fraction), f"{speedup:.2f}"
                ink = "#ffffff" if fraction > 0.55 else "#000000"
            lines.append(
                f'<rect x="{x}" y="{y}" width="{cell_w}" height="{cell_h}" fill="{fill}" '
                f'stroke="#ffffff" stroke-width="2"/>'
            )
            lines.append(
                _text(x + cell_w / 2, y + cell_h / 2 + 5, label, size=12, extra=f' fill="{ink}"')
            )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def line_chart_svg(
    series: Sequence[Series],
    title: str,
    x_label: str,
    y_label: str,
    y_max: Optional[float] = None,
    log_x: bool = False,
) -> str:
    width, height = 880, 520
    plot_left, plot_right, plot_top, plot_bottom = 80, width - 200, 60, height - 70
    plot_width, plot_height = plot_right - plot_left, plot_bottom - plot_top

    points = [p for _, data in series for p in data]
    if not points:
        raise ValueError("Nothing to plot")
    xs = [x for x, _ in points]
    # log10(1 + x) keeps x = 0 (eg. S = 0) on a log-like axis
    scale = (lambda x: math.log10(1.0 + x)) if log_x else (lambda x: x)
    x_lo, x_hi = scale(min(xs)), scale(max(xs))
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    top = y_max if y_max is not None else max(y for _, y in points) * 1.1
    top = top if top > 0 else 1.0

    def x_px(x: float) -> float:
        return plot_left + (scale(x) - x_lo) / (x_hi - x_lo) * plot_width

    def y_px(y: float) -> float:
        return plot_bottom - y / top * plot_height

    lines = _open(width, height)
    lines.append(_text(width / 2, 32, title, size=18))

    ticks = 5
    for i in range(ticks + 1):
        value = top * i / ticks
        y = y_px(value)
        lines.append(
            f'<line x1="{plot_left}" y1="{y:.2f}" x2="{plot_right}" y2="{y:.2f}" '
            f'stroke="#d9d9d9" stroke-width="1"/>'
        )
        lines.append(_text(plot_left - 8, y + 4, f"{value:.2f}", size=11, anchor="end"))
    for x in sorted(set(xs))[:: max(1, len(set(xs)) // 8)]:
        lines.append(_text(x_px(x), plot_bottom + 18, f"{x:g}", size=11))

    lines.append(
        f'<line x1="{plot_left}" y1="{plot_bottom}" x2="{plot_right}" y2="{plot_bottom}" '
        f'stroke="#000000" stroke-width="2"/>'
    )
    lines.append(
        f'<line x1="{plot_left}" y1="{plot_top}" x2="{plot_left}" y2="{plot_bottom}" '
        f'stroke="#000000" stroke-width="2"/>'
    )
    lines.append(_text((plot_left + plot_right) / 2, height - 24, x_label))
    lines.append(
        _text(
            24,
            (plot_top + plot_bottom) / 2,
            y_label,
            extra=f' transform="rotate(-90 24 {(plot_top + plot_bottom) / 2:.2f})"',
        )
    )

    for idx, (label, data) in enumerate(series):
        color = COLORS[idx % len(COLORS)]
        if data:
            coords = " ".join(f"{x_px(x):.2f},{y_px(y):.2f}" for x, y in data)
            lines.append(
                f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}"/>'
            )
        ly = plot_top + 20 + idx * 24
        lines.append(
            f'<line x1="{plot_right + 20}" y1="{ly}" x2="{plot_right + 44}" y2="{ly}" '
            f'stroke="{color}" stroke-width="3"/>'
        )
        lines.append(_text(plot_right + 52, ly + 5, label, anchor="start"))

    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def write_svg(path: str, svg: str) -> None:
    with open(path, "w") as f:
        f.write(svg)
