"""Floorplan assembly and raster-level overlap resolution."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import InvalidPolygon, InvariantViolation
from .geom import (
    _FOUR,
    GridTransform,
    RasterMask,
    Similarity,
    SimplePolygon,
    has_diagonal_pinch,
    is_simple_region,
    polygon_area,
    rasterize,
    trace_cell_boundaries,
)

log = logging.getLogger(__name__)

@dataclass
class Floorplan:
    """Room polygons in the input frame; ``frame`` maps input coordinates to the normalized frame."""

    rooms: list[tuple[int, SimplePolygon]] = field(default_factory=list)
    frame: Similarity = field(default_factory=Similarity)

    def __post_init__(self):
        ids = [k for k, _ in self.rooms]
        if len(set(ids)) != len(ids):
            raise ValueError("room ids must be unique")

    def __len__(self) -> int:
        return len(self.rooms)

    def polygon(self, room_id: int) -> SimplePolygon:
        return dict(self.rooms)[room_id]

    def normalized(self) -> list[tuple[int, SimplePolygon]]:
        return [(k, p.transformed(self.frame.forward)) for k, p in self.rooms]


def assemble(room_polygons, frame: Similarity | None = None) -> Floorplan:
    """Collect normalized-frame room polygons into a floorplan in the input frame.

    ``room_polygons`` is a list of ``(id, polygon)`` pairs or bare polygons
    (numbered by position). Rooms are sorted by id.
    """
    frame = frame or Similarity()
    rooms = []
    for k, item in enumerate(room_polygons):
        rid, poly = item if isinstance(item, tuple) else (k, item)
        rooms.append((int(rid), poly.transformed(frame.inverse)))
    rooms.sort(key=lambda r: r[0])
    return Floorplan(rooms, frame)


def overlap_grid(plan: Floorplan, resolution: int = 256) -> RasterMask:
    """The shared raster `resolve_overlaps` uses for ``plan``."""
    corners = np.concatenate([p.corners for _, p in plan.rooms])
    lo, hi = corners.min(axis=0), corners.max(axis=0)
    extent = max(float(np.max(hi - lo)), 1e-9)
    # cell size quantized to steps of 2**(1/16) and the origin snapped to the
    # lattice, so small changes of the bounding box keep the same cells
    cell = 2.0 ** (math.ceil(16 * math.log2(extent / (resolution - 2))) / 16)
    origin = np.floor(lo / cell) * cell - cell
    width = min(int(math.ceil((hi[0] - origin[0]) / cell)) + 1, resolution)
    height = min(int(math.ceil((hi[1] - origin[1]) / cell)) + 1, resolution)
    return RasterMask(width, height, GridTransform(1.0 / cell, tuple(-origin / cell)))


def _largest_component(mask: np.ndarray) -> np.ndarray:
    lab, n = ndimage.label(mask, structure=_FOUR)
    if n <= 1:
        return mask.copy()
    sizes = ndimage.sum(mask, lab, index=np.arange(1, n + 1))
    return lab == (int(np.argmax(sizes)) + 1)


def _clear_pinches(mask: np.ndarray) -> np.ndarray:
    """Remove one cell of every diagonal-only contact, one at a time."""
    m = mask.copy()
    while has_diagonal_pinch(m):
        p = np.zeros((m.shape[0] + 2, m.shape[1] + 2), dtype=bool)
        p[1:-1, 1:-1] = m
        a, b, c, d = p[:-1, :-1], p[:-1, 1:], p[1:, :-1], p[1:, 1:]
        main = a & d & ~b & ~c
        anti = b & c & ~a & ~d
        # padded window (r, k) starts at original cell (r-1, k-1)
        r, k = np.argwhere(main | anti)[0]
        if main[r, k]:
            m[r - 1, k - 1] = False
        else:
            m[r - 1, k] = False
    return m


def _carve_holes(mask: np.ndarray) -> np.ndarray:
    m = mask.copy()
    outside = np.ones((m.shape[0] + 2, m.shape[1] + 2), dtype=bool)
    outside[1:-1, 1:-1] = ~m
    lab, n = ndimage.label(outside, structure=_FOUR)
    exterior = lab[0, 0]
    for h in range(1, n + 1):
        if h == exterior:
            continue
        r, c = np.argwhere(lab == h)[0]
        r, c = r - 1, c - 1
        # open a one-cell channel straight down to the exterior
        for rr in range(r - 1, -1, -1):
            if lab[rr + 1, c + 1] == exterior:
                break
            m[rr, c] = False
    return m


def _make_simple(mask: np.ndarray) -> np.ndarray:
    m = _largest_component(mask)
    for _ in range(64):
        if not m.any() or is_simple_region(m):
            return m
        m = _largest_component(_carve_holes(_clear_pinches(m)))
    return np.zeros_like(m)


def _rdp(points: np.ndarray, tol: float) -> np.ndarray:
    if len(points) < 3:
        return points
    a, b = points[0], points[-1]
    ab = b - a
    length = float(np.hypot(*ab))
    rel = points - a
    if length == 0:
        dev = np.hypot(rel[:, 0], rel[:, 1])
    else:
        dev = np.abs(ab[0] * rel[:, 1] - ab[1] * rel[:, 0]) / length
    k = int(np.argmax(dev))
    if dev[k] <= tol:
        return np.array([a, b])
    left = _rdp(points[:k + 1], tol)
    return np.concatenate([left[:-1], _rdp(points[k:], tol)])


def _simplify_closed(loop: np.ndarray, tol: float) -> np.ndarray:
    far = int(np.argmax(np.hypot(*(loop - loop[0]).T)))
    closed = np.concatenate([loop, loop[:1]])
    first = _rdp(closed[:far + 1], tol)
    second = _rdp(closed[far:], tol)
    return np.concatenate([first[:-1], second[:-1]])


def _vectorize(mask: np.ndarray, grid: RasterMask, others: np.ndarray,
               lo: np.ndarray, hi: np.ndarray) -> SimplePolygon | None:
    region = _make_simple(mask)
    if not region.any():
        return None
    loop = trace_cell_boundaries(region)[0]
    # every kept cell centre lies inside the old outline, so clamping the
    # outer lattice lines to its box keeps the vertex order and never
    # lets the plan's bounding box grow
    exact = SimplePolygon(np.clip(grid.transform.invert(loop), lo, hi))
    try:
        simple = SimplePolygon(np.clip(grid.transform.invert(_simplify_closed(loop, 1.0)), lo, hi))
    except InvalidPolygon:
        return exact
    if len(simple) < len(exact) and not (rasterize(simple, grid).cells & others).any():
        return simple
    return exact


def resolve_overlaps(plan: Floorplan, resolution: int = 256, grid: RasterMask | None = None) -> Floorplan:
    """Make room footprints mutually exclusive.

    Rooms are rasterized on a shared grid (by default `overlap_grid` of the
    plan); a cell claimed by several rooms goes to the smallest room (lowest
    id on ties). Rooms that lost cells are re-traced from their remaining
    largest region; rooms left empty are dropped. On the same grid the output
    is a fixed point.
    """
    if len(plan.rooms) <= 1:
        return Floorplan(list(plan.rooms), plan.frame)
    grid = grid or overlap_grid(plan, resolution)
    masks = [rasterize(p, grid).cells for _, p in plan.rooms]
    owner = np.full((grid.height, grid.width), -1, dtype=np.int64)
    priority = sorted(range(len(plan.rooms)), key=lambda i: (polygon_area(plan.rooms[i][1]), plan.rooms[i][0]))
    for i in priority:
        owner[masks[i] & (owner == -1)] = i

    rooms = []
    for i, (rid, poly) in enumerate(plan.rooms):
        kept = owner == i
        if np.array_equal(kept, masks[i]):
            rooms.append((rid, poly))
            continue
        others = (owner != i) & (owner != -1)
        new = _vectorize(kept, grid, others, poly.corners.min(axis=0), poly.corners.max(axis=0))
        if new is None:
            log.info("room %d dropped: no cells left after overlap resolution", rid)
            continue
        rooms.append((rid, new))
    return Floorplan(rooms, plan.frame)


def room_masks(plan: Floorplan, resolution: int = 256, grid: RasterMask | None = None) -> list[RasterMask]:
    """Masks of every room, by default on the grid `resolve_overlaps` would use for ``plan``."""
    if not plan.rooms:
        return []
    grid = grid or overlap_grid(plan, resolution)
    return [rasterize(p, grid) for _, p in plan.rooms]


def check_disjoint(plan: Floorplan, grid: RasterMask) -> None:
    """Raise `InvariantViolation` if two rooms of ``plan`` share a cell of ``grid``."""
    masks = room_masks(plan, grid=grid)
    if masks and np.sum([m.cells for m in masks], axis=0, dtype=np.int64).max() > 1:
        raise InvariantViolation("room masks overlap after overlap resolution")
