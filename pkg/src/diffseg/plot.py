"""Barcode plots of label sequences as plain SVG text (deterministic output)."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .metrics import to_segments

# tab20-like palette, indexed by class id
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
    "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78", "#98df8a", "#ff9896",
    "#c5b0d5", "#c49c94", "#f7b6d2", "#c7c7c7", "#dbdb8d", "#9edae5",
)


def barcode_svg(
    rows: Sequence[Sequence[int]],
    names: Sequence[str] | None = None,
    width: int = 800,
    bar_height: int = 20,
    gap: int = 6,
    label_width: int = 0,
) -> str:
    """One horizontal bar per row; segment widths are proportional to frame counts."""
    if not rows:
        raise ValueError("nothing to plot")
    lengths = {len(r) for r in rows}
    if len(lengths) != 1:
        raise ValueError(f"all rows must have the same length, got {sorted(lengths)}")
    (L,) = lengths
    if L == 0:
        raise ValueError("rows are empty")
    if names is not None and len(names) != len(rows):
        raise ValueError("need one name per row")
    if names is not None and not label_width:
        label_width = 8 * max(len(n) for n in names) + 10
    scale = width / L
    height = len(rows) * (bar_height + gap) - gap
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{label_width + width}" '
        f'height="{height}" viewBox="0 0 {label_width + width} {height}">'
    ]
    for k, row in enumerate(rows):
        y = k * (bar_height + gap)
        if names is not None:
            out.append(
                f'<text x="0" y="{y + bar_height * 0.75:.2f}" font-family="monospace" '
                f'font-size="12">{_escape(names[k])}</text>'
            )
        for seg in to_segments(np.asarray(row)):
            x = label_width + seg.start * scale
            w = (seg.end - seg.start) * scale
            color = PALETTE[seg.label % len(PALETTE)]
            out.append(
                f'<rect x="{x:.3f}" y="{y}" width="{w:.3f}" height="{bar_height}" fill="{color}"/>'
            )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
