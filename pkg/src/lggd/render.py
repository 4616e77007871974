"""SVG rendering of distance maps over point-cloud graphs."""

import os

import numpy as np

from .errors import SizeMismatch

_SIZE = 800
_MARGIN = 20
_RADIUS = 3.0


def _color(t):
    # red (min) -> yellow (max)
    green = int(round(255 * min(max(t, 0.0), 1.0)))
    return f"rgb(255,{green},0)"


def render_distance_map(positions, values, out_path):
    """One filled circle per node, red at the minimum value, yellow at the max."""
    positions = np.asarray(positions, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if positions.shape[0] != values.shape[0]:
        raise SizeMismatch(
            f"{positions.shape[0]} positions vs {values.shape[0]} values"
        )
    lo = positions.min(axis=0)
    hi = positions.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    scale = (_SIZE - 2 * _MARGIN) / span.max()
    vmin, vmax = values.min(), values.max()
    vspan = vmax - vmin if vmax > vmin else 1.0
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{_SIZE}" height="{_SIZE}">',
        f'<rect width="{_SIZE}" height="{_SIZE}" fill="white"/>',
    ]
    for (x, y), v in zip(positions, values):
        cx = _MARGIN + (x - lo[0]) * scale
        cy = _SIZE - (_MARGIN + (y - lo[1]) * scale)  # y axis points up
        lines.append(
            f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="{_RADIUS}" '
            f'fill="{_color((v - vmin) / vspan)}"/>'
        )
    lines.append("</svg>")
    tmp = f"{out_path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))
    os.replace(tmp, out_path)
