"""Procedural indoor scenes: occupancy-grid layouts turned into labeled wall point clouds.

A layout is grown on a 32x32 label grid from a library of 3x3 shapes. Every
boundary between a room cell and empty space (or another room) is a wall;
walls are sampled as vertical planes of points carrying two room labels and
one wall label. The ground-truth plan is the cell-boundary polygon of each
room after the random row/column rescaling.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import ndimage
from scipy.signal import correlate2d

from .geom import SimplePolygon, Similarity, is_simple_region, trace_cell_boundaries

log = logging.getLogger(__name__)

EMPTY = -1
GRID_SIZE = 32
_FOUR = ndimage.generate_binary_structure(2, 1)


class PlacementExhausted(RuntimeWarning):
    """No legal placement was found within the retry budget."""


@dataclass(frozen=True)
class ShapeKernel:
    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits, dtype=bool)
        if b.shape != (3, 3) or not b.any():
            raise ValueError("kernel must be a nonempty 3x3 boolean matrix")
        b.setflags(write=False)
        object.__setattr__(self, "bits", b)

    def trimmed(self) -> np.ndarray:
        rows = np.flatnonzero(self.bits.any(axis=1))
        cols = np.flatnonzero(self.bits.any(axis=0))
        return self.bits[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1]

    @property
    def size(self) -> int:
        return int(self.bits.sum())


@dataclass
class SceneSpec:
    n_rooms_max: int = 10
    n_rooms_min: int = 1
    super_room_prob: float = 0.2
    points_per_wall_density: float = 300.0
    cutout_count_range: tuple[int, int] = (0, 3)
    cutout_size_range: tuple[float, float] = (0.1, 0.4)
    wall_height: float = 1.0
    rotation_range: float = 0.0
    axis_scale_range: tuple[float, float] = (0.8, 1.25)
    cell_scale_range: tuple[float, float] = (0.85, 1.2)
    # base shapes are drawn from library kernels with at most this many
    # outline corners (None: whole library); super-rooms still merge them
    max_shape_corners: int | None = 4
    # candidate anchor positions tried per placement; the one with the most
    # contact to occupied cells wins, so larger values give tighter layouts
    placement_tries: int = 16
    rng_seed: int = 0
    grid_size: int = GRID_SIZE

    def __post_init__(self):
        if self.n_rooms_max < 1 or not 1 <= self.n_rooms_min <= self.n_rooms_max:
            raise ValueError("need 1 <= n_rooms_min <= n_rooms_max")
        if not 0.0 <= self.super_room_prob <= 1.0:
            raise ValueError("super_room_prob must be in [0, 1]")
        if self.points_per_wall_density <= 0:
            raise ValueError("points_per_wall_density must be positive")
        for name in ("cutout_count_range", "cutout_size_range", "axis_scale_range", "cell_scale_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} is empty")
        if self.cutout_count_range[0] < 0:
            raise ValueError("cutout counts must be >= 0")
        if self.wall_height <= 0:
            raise ValueError("wall_height must be positive")
        if self.max_shape_corners is not None and self.max_shape_corners < 4:
            raise ValueError("max_shape_corners must be >= 4 or None")
        if self.placement_tries < 1:
            raise ValueError("placement_tries must be >= 1")


@dataclass
class OccupancyGrid:
    labels: np.ndarray

    @property
    def n_rooms(self) -> int:
        return int(self.labels.max()) + 1 if (self.labels >= 0).any() else 0

    def room_mask(self, k: int) -> np.ndarray:
        return self.labels == k


@dataclass
class LabeledPointCloud:
    points: np.ndarray
    room_label_0: np.ndarray | None = None
    room_label_1: np.ndarray | None = None
    wall_label: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        n = len(self.points)
        for name in ("room_label_0", "room_label_1", "wall_label"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, dtype=np.int64).reshape(-1)
                if len(v) != n:
                    raise ValueError(f"{name} has {len(v)} entries for {n} points")
                setattr(self, name, v)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def labeled(self) -> bool:
        return self.room_label_0 is not None and self.room_label_1 is not None \
            and self.wall_label is not None

    def subset(self, idx) -> "LabeledPointCloud":
        pick = lambda a: None if a is None else a[idx]  # noqa: E731
        return LabeledPointCloud(self.points[idx], pick(self.room_label_0),
                                 pick(self.room_label_1), pick(self.wall_label))


@dataclass
class GroundTruthPlan:
    rooms: list[tuple[int, SimplePolygon]] = field(default_factory=list)


@dataclass(frozen=True)
class Wall:
    """Axis-aligned wall piece in pre-normalization units.

    A piece has one room pair on its two sides; ``run`` numbers the maximal
    straight, gap-free run the piece belongs to, which is the wall instance.
    """

    axis: str            # "h": along x at y=coord, "v": along y at x=coord
    coord: float
    start: float
    end: float
    labels: tuple[int, int]   # (below/left, above/right), EMPTY for no room
    run: int = -1

    @property
    def length(self) -> float:
        return self.end - self.start


@lru_cache(maxsize=1)
def _library() -> tuple[ShapeKernel, ...]:
    seen = set()
    shapes = []
    for code in range(1, 512):
        bits = np.array([(code >> k) & 1 for k in range(9)], dtype=bool).reshape(3, 3)
        if not is_simple_region(bits):
            continue
        # shapes equal up to translation inside the kernel are the same shape
        rows = np.flatnonzero(bits.any(axis=1))
        cols = np.flatnonzero(bits.any(axis=0))
        canon = np.zeros((3, 3), dtype=bool)
        t = bits[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1]
        canon[:t.shape[0], :t.shape[1]] = t
        key = canon.tobytes()
        if key in seen:
            continue
        seen.add(key)
        shapes.append(ShapeKernel(canon))
    return tuple(shapes)


def build_shape_library() -> list[ShapeKernel]:
    """All simple 4-connected cell patterns that fit a 3x3 kernel, one per translation class."""
    return list(_library())


def shape_corners(shape: ShapeKernel) -> int:
    return len(trace_cell_boundaries(shape.bits)[0])


def layout_shapes(spec: SceneSpec) -> list[ShapeKernel]:
    lib = build_shape_library()
    if spec.max_shape_corners is None:
        return lib
    return [s for s in lib if shape_corners(s) <= spec.max_shape_corners]


def generate_layout(spec: SceneSpec, library: list[ShapeKernel] | None = None) -> OccupancyGrid:
    rng = np.random.default_rng([spec.rng_seed, 0])
    lib = library if library is not None else layout_shapes(spec)
    g = spec.grid_size
    labels = np.full((g, g), EMPTY, dtype=np.int64)

    first = lib[rng.integers(len(lib))].trimmed()
    top = g // 2 - 2 + (3 - first.shape[0]) // 2
    left = g // 2 - 2 + (3 - first.shape[1]) // 2
    labels[top:top + first.shape[0], left:left + first.shape[1]][first] = 0

    target = int(rng.integers(spec.n_rooms_min, spec.n_rooms_max + 1))
    n_labels, failures, merges = 1, 0, 0
    max_failures = 60
    while n_labels < target and failures < max_failures:
        merge = merges < target and rng.random() < spec.super_room_prob
        shape = lib[rng.integers(len(lib))].trimmed()
        room = int(rng.integers(n_labels)) if merge else n_labels
        anchor = labels == room if merge else labels >= 0
        if _place(labels, shape, anchor, room, merge, rng, spec.placement_tries):
            if merge:
                merges += 1
            else:
                n_labels += 1
        else:
            failures += 1
    if n_labels < target:
        log.warning("%s: placed %d of %d rooms (seed %d)", PlacementExhausted.__name__,
                    n_labels, target, spec.rng_seed)
    return OccupancyGrid(labels)


def _place(labels, shape, anchor, room, check_region, rng, tries, max_checks=40) -> bool:
    occupied = labels >= 0
    ring = ndimage.binary_dilation(anchor, structure=_FOUR) & ~occupied
    overlap = correlate2d(occupied.astype(np.int32), shape.astype(np.int32), mode="valid")
    touch = correlate2d(ring.astype(np.int32), shape.astype(np.int32), mode="valid")
    cand = np.argwhere((overlap == 0) & (touch > 0))
    if len(cand) == 0:
        return False
    order = rng.permutation(len(cand))
    if not check_region:
        pick = order[:tries]
        contact = touch[cand[pick, 0], cand[pick, 1]]
        order = pick[[int(np.argmax(contact))]]
    h, w = shape.shape
    for k in order[:max_checks]:
        r, c = cand[k]
        if check_region:
            trial = labels == room
            trial[r:r + h, c:c + w] |= shape
            if not is_simple_region(trial):
                continue
        labels[r:r + h, c:c + w][shape] = room
        return True
    return False


def _wall_runs(sub: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> list[Wall]:
    rows, cols = sub.shape
    p = np.full((rows + 2, cols + 2), EMPTY, dtype=np.int64)
    p[1:-1, 1:-1] = sub
    walls = []
    # horizontal grid lines y = ys[i], between sub rows i-1 (below) and i (above)
    for i in range(rows + 1):
        run = None
        for j in range(cols + 1):
            key = None
            if j < cols:
                below, above = int(p[i, j + 1]), int(p[i + 1, j + 1])
                if below != above:
                    key = (below, above)
            if run is not None and key != run[0]:
                walls.append(Wall("h", float(ys[i]), float(xs[run[1]]), float(xs[j]), run[0]))
                run = None
            if key is not None and run is None:
                run = (key, j)
    for j in range(cols + 1):
        run = None
        for i in range(rows + 1):
            key = None
            if i < rows:
                left, right = int(p[i + 1, j]), int(p[i + 1, j + 1])
                if left != right:
                    key = (left, right)
            if run is not None and key != run[0]:
                walls.append(Wall("v", float(xs[j]), float(ys[run[1]]), float(ys[i]), run[0]))
                run = None
            if key is not None and run is None:
                run = (key, i)
    return _number_runs(walls)


def _number_runs(pieces: list[Wall]) -> list[Wall]:
    out, run = [], -1
    for k, w in enumerate(pieces):
        prev = pieces[k - 1] if k else None
        if not (prev and prev.axis == w.axis and prev.coord == w.coord and prev.end == w.start):
            run += 1
        out.append(Wall(w.axis, w.coord, w.start, w.end, w.labels, run))
    return out


def grid_to_scene(grid: OccupancyGrid, spec: SceneSpec) -> tuple[LabeledPointCloud, GroundTruthPlan]:
    rng = np.random.default_rng([spec.rng_seed, 1])
    occ = np.argwhere(grid.labels >= 0)
    if len(occ) == 0:
        raise ValueError("empty occupancy grid")
    (r0, c0), (r1, c1) = occ.min(axis=0), occ.max(axis=0)
    sub = grid.labels[r0:r1 + 1, c0:c1 + 1]
    rows, cols = sub.shape
    lo, hi = spec.cell_scale_range
    xs = np.concatenate([[0.0], np.cumsum(rng.uniform(lo, hi, cols))])
    ys = np.concatenate([[0.0], np.cumsum(rng.uniform(lo, hi, rows))])

    walls = _wall_runs(sub, xs, ys)
    height = spec.wall_height
    pts, l0, l1, wl = [], [], [], []
    for k, wall in enumerate(walls):
        n = int(round(spec.points_per_wall_density * wall.length * height))
        t = rng.uniform(wall.start, wall.end, n)
        z = rng.uniform(0.0, height, n)
        if wall.axis == "h":
            xyz = np.column_stack([t, np.full(n, wall.coord), z])
        else:
            xyz = np.column_stack([np.full(n, wall.coord), t, z])
        a, b = wall.labels
        if a == EMPTY:
            a = b
        if b == EMPTY:
            b = a
        a, b = min(a, b), max(a, b)
        pts.append(xyz)
        l0.append(np.full(n, a))
        l1.append(np.full(n, b))
        wl.append(np.full(n, wall.run))
    points = np.concatenate(pts)
    room0, room1, wall_lab = np.concatenate(l0), np.concatenate(l1), np.concatenate(wl)

    keep = np.ones(len(points), dtype=bool)
    n_cut = int(rng.integers(spec.cutout_count_range[0], spec.cutout_count_range[1] + 1))
    for _ in range(n_cut):
        k = int(rng.integers(len(walls)))
        wall = walls[k]
        frac_len, frac_h = rng.uniform(*spec.cutout_size_range, 2)
        cut_len, cut_h = frac_len * wall.length, frac_h * height
        s0 = wall.start + rng.uniform(0.0, wall.length - cut_len)
        z0 = rng.uniform(0.0, height - cut_h)
        along = points[:, 0] if wall.axis == "h" else points[:, 1]
        inside = (wall_lab == wall.run) & (along >= s0) & (along <= s0 + cut_len) \
            & (points[:, 2] >= z0) & (points[:, 2] <= z0 + cut_h)
        keep &= ~inside

    cloud = LabeledPointCloud(points[keep], room0[keep], room1[keep], wall_lab[keep])
    plan = GroundTruthPlan()
    for k in range(int(sub.max()) + 1):
        mask = sub == k
        if not mask.any():
            continue
        loops = trace_cell_boundaries(mask)
        loop = loops[0]
        corners = np.column_stack([xs[loop[:, 0].astype(int)], ys[loop[:, 1].astype(int)]])
        plan.rooms.append((k, SimplePolygon(corners)))
    return cloud, plan


def normalization_frame(points) -> Similarity:
    """Frame that fits the XY bounding box into [0, 2]^2 (aspect kept) and starts Z at 0."""
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    mn = p.min(axis=0)
    extent = float(np.max(p[:, :2].max(axis=0) - mn[:2]))
    if extent <= 0:
        raise ValueError("points have no XY extent")
    scale = 2.0 / extent
    if abs(scale - 1.0) < 1e-9 and np.all(np.abs(mn) < 1e-9):
        return Similarity()
    return Similarity(scale, (float(mn[0]), float(mn[1]), float(mn[2])))


def apply_frame(cloud: LabeledPointCloud, plan: GroundTruthPlan | None,
                frame: Similarity) -> tuple[LabeledPointCloud, GroundTruthPlan | None]:
    out = LabeledPointCloud(frame.forward(cloud.points), cloud.room_label_0,
                            cloud.room_label_1, cloud.wall_label)
    if plan is None:
        return out, None
    rooms = [(k, poly.transformed(frame.forward)) for k, poly in plan.rooms]
    return out, GroundTruthPlan(rooms)


def augment_and_normalize(cloud: LabeledPointCloud, plan: GroundTruthPlan,
                          spec: SceneSpec) -> tuple[LabeledPointCloud, GroundTruthPlan]:
    if len(cloud) == 0:
        raise ValueError("empty cloud")
    rng = np.random.default_rng([spec.rng_seed, 2])
    sx, sy, sz = rng.uniform(*spec.axis_scale_range, 3)
    theta = math.radians(rng.uniform(-spec.rotation_range, spec.rotation_range))
    c, s = math.cos(theta), math.sin(theta)
    xy = np.array([[c, -s], [s, c]]) @ np.diag([sx, sy])

    def map_xy(p):
        return p @ xy.T

    pts = np.column_stack([map_xy(cloud.points[:, :2]), cloud.points[:, 2] * sz])
    moved = LabeledPointCloud(pts, cloud.room_label_0, cloud.room_label_1, cloud.wall_label)
    moved_plan = GroundTruthPlan([(k, poly.transformed(map_xy)) for k, poly in plan.rooms])
    return apply_frame(moved, moved_plan, normalization_frame(pts))


def generate_scene(spec: SceneSpec) -> tuple[LabeledPointCloud, GroundTruthPlan]:
    grid = generate_layout(spec)
    cloud, plan = grid_to_scene(grid, spec)
    return augment_and_normalize(cloud, plan, spec)
