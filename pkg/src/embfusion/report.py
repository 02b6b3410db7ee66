"""Render sweep summaries as CSV, Markdown tables, or SVG bar charts.

All three encoders print the same numbers (three decimals, matching the
published tables) and the same row order as :func:`harness.aggregate`.
"""
from __future__ import annotations

from xml.sax.saxutils import escape

from .harness import SummaryRow


def _fmt(x: float) -> str:
    return f"{x:.3f}"


def render_csv(rows: list[SummaryRow]) -> str:
    lines = ["combination,accuracy,macro_f1"]
    for r in rows:
        lines.append(f"{r.combination},{_fmt(r.accuracy_mean)},{_fmt(r.macro_f1_mean)}")
    return "\n".join(lines) + "\n"


def render_markdown(rows: list[SummaryRow]) -> str:
    lines = [
        "| combination | accuracy | macro_f1 |",
        "| --- | --- | --- |",
    ]
    for r in rows:
        lines.append(f"| {r.combination} | {_fmt(r.accuracy_mean)} | {_fmt(r.macro_f1_mean)} |")
    return "\n".join(lines) + "\n"


# Chart geometry (pixels).
_BAR_W = 12
_BAR_GAP = 4
_GROUP_GAP = 18
_PLOT_H = 240
_MARGIN_L = 48
_MARGIN_T = 30
_LABEL_H = 190


def render_svg(rows: list[SummaryRow]) -> str:
    """Grouped bar chart: one accuracy bar and one macro-F1 bar per
    combination, y axis fixed to [0, 1]."""
    group_w = 2 * _BAR_W + _BAR_GAP + _GROUP_GAP
    width = _MARGIN_L + group_w * len(rows) + 20
    height = _MARGIN_T + _PLOT_H + _LABEL_H
    base_y = _MARGIN_T + _PLOT_H

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        '<style>text{font-family:sans-serif;font-size:10px;}'
        '.bar-accuracy{fill:#4878a8;}.bar-macro-f1{fill:#e08a3c;}</style>',
    ]
    # y axis with ticks every 0.2
    parts.append(
        f'<line x1="{_MARGIN_L}" y1="{_MARGIN_T}" x2="{_MARGIN_L}" y2="{base_y}" '
        'stroke="black"/>'
    )
    for tick in range(6):
        v = tick / 5
        y = base_y - v * _PLOT_H
        parts.append(
            f'<line x1="{_MARGIN_L - 4}" y1="{y:.1f}" x2="{width - 10}" y2="{y:.1f}" '
            'stroke="#cccccc"/>'
        )
        parts.append(f'<text x="{_MARGIN_L - 8}" y="{y + 3:.1f}" text-anchor="end">{v:.1f}</text>')

    for i, row in enumerate(rows):
        x0 = _MARGIN_L + _GROUP_GAP // 2 + i * group_w
        for j, (metric, value) in enumerate(
            (("accuracy", row.accuracy_mean), ("macro-f1", row.macro_f1_mean))
        ):
            value = min(max(value, 0.0), 1.0)
            h = value * _PLOT_H
            x = x0 + j * (_BAR_W + _BAR_GAP)
            parts.append(
                f'<rect class="bar bar-{metric}" x="{x}" y="{base_y - h:.1f}" '
                f'width="{_BAR_W}" height="{h:.1f}"/>'
            )
        lx = x0 + _BAR_W + _BAR_GAP // 2
        parts.append(
            f'<text transform="rotate(-60 {lx} {base_y + 10})" x="{lx}" y="{base_y + 10}" '
            f'text-anchor="end">{escape(row.combination)}</text>'
        )

    legend_x = _MARGIN_L + 10
    parts.append(f'<rect class="bar-accuracy" x="{legend_x}" y="6" width="10" height="10"/>')
    parts.append(f'<text x="{legend_x + 14}" y="15">accuracy</text>')
    parts.append(f'<rect class="bar-macro-f1" x="{legend_x + 80}" y="6" width="10" height="10"/>')
    parts.append(f'<text x="{legend_x + 94}" y="15">macro F1</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


RENDERERS = {"csv": render_csv, "md": render_markdown, "svg": render_svg}
