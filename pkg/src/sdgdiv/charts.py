"""Deterministic SVG renderers for the report figures.

SVG is emitted as plain text with fixed formatting so that identical inputs
produce byte-identical files, which the run manifest relies on. No plotting
library is involved: charts here are simple enough (horizontal bar charts,
a fixed-layout three-circle Venn) that hand-rolled markup is smaller than
the determinism patches a plotting backend would need.
"""

from __future__ import annotations

import csv
import io
from typing import Sequence
from xml.sax.saxutils import escape

from .overlap import VennPartition

_FONT = "font-family=\"Helvetica, Arial, sans-serif\""
BAR_COLORS = ("#4878a8", "#e49444", "#6a9f58")


def frequency_chart_svg(
    rows: Sequence[tuple[str, int]], title: str, empty_note: str = "no phrases above threshold"
) -> str:
    """Horizontal bar chart of (label, count) rows sorted by falling count."""
    rows = sorted(rows, key=lambda r: (-r[1], r[0]))
    label_w, bar_w, bar_h, gap, top = 260, 420, 16, 6, 48
    width = label_w + bar_w + 80
    if not rows:
        height = top + 40
        return (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">\n'
            f'<text x="16" y="24" {_FONT} font-size="15" font-weight="bold">{escape(title)}</text>\n'
            f'<text x="16" y="{top + 16}" {_FONT} font-size="13" fill="#666">{escape(empty_note)}</text>\n'
            "</svg>\n"
        )
    max_count = max(count for _, count in rows)
    height = top + len(rows) * (bar_h + gap) + 20
    out = io.StringIO()
    out.write(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
    )
    out.write(
        f'<text x="16" y="24" {_FONT} font-size="15" font-weight="bold">{escape(title)}</text>\n'
    )
    for i, (label, count) in enumerate(rows):
        y = top + i * (bar_h + gap)
        w = bar_w * count / max_count if max_count else 0
        out.write(
            f'<text x="{label_w - 8}" y="{y + bar_h - 4}" {_FONT} font-size="12" '
            f'text-anchor="end">{escape(label)}</text>\n'
        )
        out.write(
            f'<rect x="{label_w}" y="{y}" width="{w:.2f}" height="{bar_h}" '
            f'fill="{BAR_COLORS[0]}"/>\n'
        )
        out.write(
            f'<text x="{label_w + w + 6:.2f}" y="{y + bar_h - 4}" {_FONT} '
            f'font-size="12">{count}</text>\n'
        )
    out.write("</svg>\n")
    return out.getvalue()


def frequency_chart_csv(rows: Sequence[tuple[str, int]]) -> str:
    """CSV mirror of the plotted data, same order as the bars."""
    rows = sorted(rows, key=lambda r: (-r[1], r[0]))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["phrase", "count"])
    writer.writerows(rows)
    return buf.getvalue()


def parse_frequency_csv(text: str) -> list[tuple[str, int]]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != ["phrase", "count"]:
        raise ValueError(f"unexpected frequency CSV header: {header}")
    return [(row[0], int(row[1])) for row in reader if row]


# Region label anchors for the fixed three-circle layout (A left, B right,
# C bottom). Keys are frozensets over circle slots 0, 1, 2.
_VENN_CENTERS = ((190, 170), (330, 170), (260, 290))
_VENN_RADIUS = 130
_REGION_ANCHORS = {
    (0,): (140, 140),
    (1,): (380, 140),
    (2,): (260, 360),
    (0, 1): (260, 130),
    (0, 2): (185, 265),
    (1, 2): (335, 265),
    (0, 1, 2): (260, 215),
}


def venn_svg(partition: VennPartition) -> str:
    """Fixed-position three-circle Venn with count and percentage labels."""
    width, height = 520, 460
    out = io.StringIO()
    out.write(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
    )
    out.write(
        f'<text x="16" y="26" {_FONT} font-size="16" font-weight="bold">'
        f"SDG {partition.sdg} overlap (union {partition.union_size})</text>\n"
    )
    for (cx, cy), color, source in zip(_VENN_CENTERS, BAR_COLORS, partition.sources):
        out.write(
            f'<circle cx="{cx}" cy="{cy}" r="{_VENN_RADIUS}" fill="{color}" '
            f'fill-opacity="0.25" stroke="{color}" stroke-width="2"/>\n'
        )
    label_anchors = ((90, 60), (430, 60), (260, 445))
    for (x, y), source in zip(label_anchors, partition.sources):
        anchor = "middle"
        out.write(
            f'<text x="{x}" y="{y}" {_FONT} font-size="14" font-weight="bold" '
            f'text-anchor="{anchor}">{escape(source)}</text>\n'
        )
    for slots, (x, y) in _REGION_ANCHORS.items():
        region = tuple(partition.sources[s] for s in slots)
        count = partition.region_counts[region]
        pct = partition.percentages[region]
        out.write(
            f'<text x="{x}" y="{y}" {_FONT} font-size="12" text-anchor="middle">'
            f"{count}</text>\n"
        )
        out.write(
            f'<text x="{x}" y="{y + 14}" {_FONT} font-size="11" fill="#444" '
            f'text-anchor="middle">{pct:.1f}%</text>\n'
        )
    out.write("</svg>\n")
    return out.getvalue()
