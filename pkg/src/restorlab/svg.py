"""Minimal standalone SVG scatter plots."""

import numpy as np

from ._validation import InvalidArgument
from .distributions import SampleSet

__all__ = ["emit_scatter_svg", "scatter_svg", "PALETTE"]

SIZE = 640
MARGIN = 0.05
MAX_SETS = 8
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")


def _f(v):
    return f"{v:.2f}"


def scatter_svg(sets, radius=1.6):
    """Render ``[(SampleSet, color), ...]`` as SVG text.

    Axes share one scale; the view covers the joint bounding box plus a
    5% margin on each side.
    """
    sets = list(sets)
    if not sets:
        raise InvalidArgument("need at least one sample set")
    if len(sets) > MAX_SETS:
        raise InvalidArgument(f"at most {MAX_SETS} sets per plot, got {len(sets)}")
    for s, _ in sets:
        if not isinstance(s, SampleSet):
            raise InvalidArgument("sets must contain SampleSet instances")
    allpts = np.concatenate([s.points for s, _ in sets])
    lo, hi = allpts.min(axis=0), allpts.max(axis=0)
    center = 0.5 * (lo + hi)
    span = float(np.max(hi - lo))
    if span == 0.0:
        span = 1.0
    span *= 1.0 + 2.0 * MARGIN
    scale = SIZE / span

    def px(p):
        x = (p[:, 0] - center[0]) * scale + SIZE / 2
        y = SIZE / 2 - (p[:, 1] - center[1]) * scale
        return x, y

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" '
        f'viewBox="0 0 {SIZE} {SIZE}">',
        f'<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white"/>',
    ]
    for s, color in sets:
        out.append(f'<g fill="{color}" fill-opacity="0.6">')
        xs, ys = px(s.points)
        for x, y in zip(xs, ys):
            out.append(f'<circle cx="{_f(x)}" cy="{_f(y)}" r="{radius}"/>')
        out.append("</g>")
    out.append('<g font-family="sans-serif" font-size="12">')
    for i, (s, color) in enumerate(sets):
        y = 16 + 16 * i
        out.append(f'<rect x="8" y="{y - 9}" width="10" height="10" fill="{color}"/>')
        label = (s.label or f"set {i}").replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
        out.append(f'<text x="22" y="{y}">{label}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_scatter_svg(sets, path):
    """Write :func:`scatter_svg` output to ``path``."""
    text = scatter_svg(sets)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
