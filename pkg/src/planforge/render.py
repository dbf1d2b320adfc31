"""SVG export of floorplans."""
from __future__ import annotations

import colorsys
from xml.sax.saxutils import escape

import numpy as np

from .assembly import Floorplan


def room_color(room_id: int) -> str:
    # golden-angle hue steps keep neighbouring ids far apart on the wheel
    hue = (room_id * 0.38196601125) % 1.0
    r, g, b = colorsys.hls_to_rgb(hue, 0.72, 0.55)
    return "#{:02x}{:02x}{:02x}".format(round(r * 255), round(g * 255), round(b * 255))


def _f(v: float) -> str:
    return f"{v:.6g}"


def render_svg(plan: Floorplan, width_px: int = 800, margin: float = 0.05) -> str:
    """Filled room polygons with id labels; y points up as in the plan frame."""
    if plan.rooms:
        pts = np.concatenate([p.corners for _, p in plan.rooms])
        lo, hi = pts.min(axis=0), pts.max(axis=0)
    else:
        lo, hi = np.zeros(2), np.ones(2)
    size = np.maximum(hi - lo, 1e-9)
    pad = margin * size
    x0, y0 = lo - pad
    w, h = size + 2 * pad
    height_px = max(1, round(width_px * h / w))
    stroke = 0.004 * max(w, h)
    font = 0.04 * max(w, h)

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width_px}" height="{height_px}" '
        f'viewBox="{_f(x0)} {_f(-(y0 + h))} {_f(w)} {_f(h)}">',
    ]
    for rid, poly in plan.rooms:
        c = poly.corners
        d = "M " + " L ".join(f"{_f(x)} {_f(-y)}" for x, y in c) + " Z"
        out.append(f'<path id="room-{rid}" d="{d}" fill="{room_color(rid)}" fill-opacity="0.8" '
                   f'stroke="#222222" stroke-width="{_f(stroke)}"/>')
    for rid, poly in plan.rooms:
        cx, cy = poly.corners.mean(axis=0)
        out.append(f'<text x="{_f(cx)}" y="{_f(-cy)}" font-size="{_f(font)}" font-family="sans-serif" '
                   f'text-anchor="middle" dominant-baseline="middle">{escape(str(rid))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
