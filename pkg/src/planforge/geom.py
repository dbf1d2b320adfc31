"""2D/3D geometry primitives shared by the reconstruction pipeline.

Points are plain numpy arrays: a 2D point is shape ``(2,)``, a point set is
``(n, 2)``.  The small value types (`Line2`, `Segment2`, `SimplePolygon`,
`RasterMask`) wrap those arrays and check their invariants on construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import (
    DegenerateInput,
    DimMismatch,
    FewerThanTwoPoints,
    InvalidPolygon,
    OutOfBounds,
    SelfIntersecting,
)

PARALLEL_SINE = 1e-6
MIN_SEGMENT_LENGTH = 1e-6


def _as_points(points) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    return arr


@dataclass(frozen=True)
class Line2:
    """Line in signed-distance form: ``normal . p == offset``."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float).reshape(2)
        norm = float(np.hypot(n[0], n[1]))
        if not math.isfinite(norm) or norm == 0.0:
            raise DegenerateInput("line normal must be nonzero and finite")
        if abs(norm - 1.0) > 1e-9:
            n = n / norm
            object.__setattr__(self, "offset", float(self.offset) / norm)
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def through(cls, p, q) -> "Line2":
        p = np.asarray(p, dtype=float)
        d = np.asarray(q, dtype=float) - p
        length = float(np.hypot(d[0], d[1]))
        if length < 1e-12:
            raise DegenerateInput("coincident points do not define a line")
        n = np.array([-d[1], d[0]]) / length
        return cls(n, float(n @ p)).canonical()

    @property
    def direction(self) -> np.ndarray:
        return np.array([-self.normal[1], self.normal[0]])

    def distance(self, points) -> np.ndarray:
        """Unsigned orthogonal distance of each point to the line."""
        return np.abs(_as_points(points) @ self.normal - self.offset)

    def canonical(self) -> "Line2":
        """Same line with the normal flipped into the half-plane ny > 0 (or nx > 0 when ny == 0)."""
        nx, ny = self.normal
        if ny < -1e-15 or (abs(ny) <= 1e-15 and nx < 0):
            return Line2(-self.normal, -self.offset)
        return self

    def flipped(self) -> "Line2":
        return Line2(-self.normal, -self.offset)


@dataclass(frozen=True)
class Segment2:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).reshape(2)
        b = np.asarray(self.b, dtype=float).reshape(2)
        if float(np.hypot(*(b - a))) < MIN_SEGMENT_LENGTH:
            raise DegenerateInput("segment shorter than 1e-6")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def length(self) -> float:
        return float(np.hypot(*(self.b - self.a)))

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.a + self.b)

    @property
    def direction(self) -> np.ndarray:
        return (self.b - self.a) / self.length


def signed_area(corners) -> float:
    c = _as_points(corners)
    x, y = c[:, 0], c[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _orient(p, q, r) -> float:
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])


def _on_segment(p, q, r, tol) -> bool:
    # r collinear with pq: is it within the pq bounding box?
    return (min(p[0], q[0]) - tol <= r[0] <= max(p[0], q[0]) + tol
            and min(p[1], q[1]) - tol <= r[1] <= max(p[1], q[1]) + tol)


def segments_intersect(p1, p2, q1, q2, tol: float = 1e-12) -> bool:
    """Closed segment intersection test (touching counts)."""
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    if ((d1 > tol and d2 < -tol) or (d1 < -tol and d2 > tol)) and \
            ((d3 > tol and d4 < -tol) or (d3 < -tol and d4 > tol)):
        return True
    if abs(d1) <= tol and _on_segment(q1, q2, p1, tol):
        return True
    if abs(d2) <= tol and _on_segment(q1, q2, p2, tol):
        return True
    if abs(d3) <= tol and _on_segment(p1, p2, q1, tol):
        return True
    if abs(d4) <= tol and _on_segment(p1, p2, q2, tol):
        return True
    return False


def is_simple(corners, tol: float = 1e-12) -> bool:
    """True if no two non-adjacent edges touch and no adjacent edges fold back."""
    c = _as_points(corners)
    n = len(c)
    if n < 3:
        return False
    for i in range(n):
        a0, a1 = c[i], c[(i + 1) % n]
        nxt = c[(i + 2) % n]
        # adjacent edges folding back onto each other
        if abs(_orient(a0, a1, nxt)) <= tol and np.dot(a1 - a0, nxt - a1) < 0:
            return False
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if segments_intersect(a0, a1, c[j], c[(j + 1) % n], tol):
                return False
    return True


class SimplePolygon:
    """Counter-clockwise simple polygon.

    Clockwise input is reversed rather than rejected; anything that is not a
    simple polygon with positive area raises `InvalidPolygon`.
    """

    __slots__ = ("corners",)

    def __init__(self, corners, validate: bool = True):
        c = _as_points(corners).astype(float)
        if c.ndim != 2 or c.shape[1] != 2:
            raise InvalidPolygon("corners must be an (n, 2) array")
        if len(c) < 3:
            raise InvalidPolygon("a polygon needs at least 3 corners")
        if not np.all(np.isfinite(c)):
            raise InvalidPolygon("non-finite corner")
        if np.any(np.all(np.isclose(c, np.roll(c, -1, axis=0), rtol=0, atol=1e-12), axis=1)):
            raise InvalidPolygon("consecutive corners coincide")
        area = signed_area(c)
        if area < 0:
            c = c[::-1].copy()
            area = -area
        if validate:
            if area <= 0:
                raise InvalidPolygon("polygon has zero area")
            if not is_simple(c):
                raise SelfIntersecting("polygon edges intersect")
        c.setflags(write=False)
        self.corners = c

    def __len__(self) -> int:
        return len(self.corners)

    def __repr__(self) -> str:
        return f"SimplePolygon({self.corners.tolist()!r})"

    def __eq__(self, other) -> bool:
        return isinstance(other, SimplePolygon) and np.array_equal(self.corners, other.corners)

    @property
    def area(self) -> float:
        return polygon_area(self)

    def edges(self) -> list[tuple[np.ndarray, np.ndarray]]:
        c = self.corners
        return [(c[i], c[(i + 1) % len(c)]) for i in range(len(c))]

    def transformed(self, fn) -> "SimplePolygon":
        return SimplePolygon(fn(self.corners))


@dataclass(frozen=True)
class GridTransform:
    """World-to-grid affine map ``g = scale * p + offset`` (uniform scale)."""

    scale: float
    offset: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise DegenerateInput("grid transform must have a positive finite scale")
        object.__setattr__(self, "offset", (float(self.offset[0]), float(self.offset[1])))

    def apply(self, points) -> np.ndarray:
        return _as_points(points) * self.scale + np.asarray(self.offset)

    def invert(self, grid_points) -> np.ndarray:
        return (_as_points(grid_points) - np.asarray(self.offset)) / self.scale


@dataclass
class RasterMask:
    """Boolean occupancy grid; ``cells[row, col]`` with row along grid y."""

    width: int
    height: int
    transform: GridTransform
    cells: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise DimMismatch("raster dims must be >= 1")
        if self.cells is None:
            self.cells = np.zeros((self.height, self.width), dtype=bool)
        elif self.cells.shape != (self.height, self.width):
            raise DimMismatch("cells shape does not match width/height")

    def empty_like(self) -> "RasterMask":
        return RasterMask(self.width, self.height, self.transform)

    @property
    def count(self) -> int:
        return int(self.cells.sum())


@dataclass(frozen=True)
class Similarity:
    """Uniform scale + translation in XY, same scale and a shift in Z.

    Maps input coordinates to the normalized frame: ``p' = scale * (p - origin)``.
    """

    scale: float = 1.0
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def forward(self, points) -> np.ndarray:
        p = _as_points(points)
        o = np.asarray(self.origin[: p.shape[1]])
        return (p - o) * self.scale

    def inverse(self, points) -> np.ndarray:
        p = _as_points(points)
        o = np.asarray(self.origin[: p.shape[1]])
        return p / self.scale + o

    def to_dict(self) -> dict:
        return {"scale": self.scale, "origin": list(self.origin)}

    @classmethod
    def from_dict(cls, d) -> "Similarity":
        return cls(float(d["scale"]), tuple(float(v) for v in d["origin"]))


def fit_line_ransac(points, inlier_tol: float, iterations: int = 500,
                    rng_seed: int = 0) -> tuple[Line2, np.ndarray]:
    """Robust 2D line fit.

    Draws ``iterations`` random two-point hypotheses, keeps the one with the
    most points within ``inlier_tol``, then refits by total least squares on
    its inliers. The returned inlier indices are measured against the
    returned line, so every one of them is within tolerance.
    """
    pts = _as_points(points)[:, :2]
    n = len(pts)
    if n < 2:
        raise FewerThanTwoPoints(f"need >= 2 points, got {n}")
    if inlier_tol <= 0:
        raise ValueError("inlier_tol must be positive")
    if np.max(np.hypot(*(pts - pts[0]).T)) < 1e-12:
        raise DegenerateInput("all points coincide")

    rng = np.random.default_rng(rng_seed)
    iterations = max(int(iterations), 1)
    i = rng.integers(0, n, iterations)
    j = rng.integers(0, n - 1, iterations)
    j = j + (j >= i)
    d = pts[j] - pts[i]
    lengths = np.hypot(d[:, 0], d[:, 1])
    ok = lengths > 1e-12
    if not np.any(ok):
        # every sampled pair was coincident; fall back to an exhaustive pair
        far = int(np.argmax(np.hypot(*(pts - pts[0]).T)))
        i, j = np.array([0]), np.array([far])
        d = pts[j] - pts[i]
        lengths = np.hypot(d[:, 0], d[:, 1])
        ok = np.array([True])
    i, j, d, lengths = i[ok], j[ok], d[ok], lengths[ok]
    normals = np.stack([-d[:, 1], d[:, 0]], axis=1) / lengths[:, None]
    offsets = np.einsum("ij,ij->i", normals, pts[i])
    resid = np.abs(normals @ pts.T - offsets[:, None])
    counts = (resid <= inlier_tol).sum(axis=1)
    best = int(np.argmax(counts))
    hypothesis = Line2(normals[best], offsets[best]).canonical()
    inliers = np.flatnonzero(hypothesis.distance(pts) <= inlier_tol)

    line = hypothesis
    for _ in range(5):
        refined = _tls_line(pts[inliers])
        if refined is None:
            break
        new_inliers = np.flatnonzero(refined.distance(pts) <= inlier_tol)
        if len(new_inliers) < len(inliers):
            break
        line = refined
        if np.array_equal(new_inliers, inliers):
            break
        inliers = new_inliers
    inliers = np.flatnonzero(line.distance(pts) <= inlier_tol)
    return line, inliers


def _tls_line(pts: np.ndarray) -> Line2 | None:
    if len(pts) < 2:
        return None
    c = pts.mean(axis=0)
    centered = pts - c
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s[0] < 1e-12:
        return None
    normal = vt[-1]
    return Line2(normal, float(normal @ c)).canonical()


def project_segment(line: Line2, points) -> Segment2:
    """Segment on ``line`` spanning the extreme orthogonal projections of ``points``."""
    pts = _as_points(points)[:, :2]
    if len(pts) < 2:
        raise FewerThanTwoPoints("need >= 2 points to span a segment")
    d = line.direction
    t = pts @ d
    lo, hi = float(t.min()), float(t.max())
    if hi - lo < MIN_SEGMENT_LENGTH:
        raise DegenerateInput("projection span below 1e-6")
    base = line.normal * line.offset
    return Segment2(base + lo * d, base + hi * d)


def line_intersection(l1: Line2, l2: Line2) -> np.ndarray | None:
    """Intersection point of two lines, or None when they are parallel."""
    n1, n2 = l1.normal, l2.normal
    det = n1[0] * n2[1] - n1[1] * n2[0]
    if abs(det) < PARALLEL_SINE:
        return None
    x = (l1.offset * n2[1] - n1[1] * l2.offset) / det
    y = (n1[0] * l2.offset - l1.offset * n2[0]) / det
    return np.array([x, y])


def polygon_area(p: SimplePolygon) -> float:
    return abs(signed_area(p.corners))


def points_in_polygon(points, corners) -> np.ndarray:
    """Even-odd containment of each point."""
    pts = _as_points(points)
    c = _as_points(corners)
    px, py = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    xj, yj = c[-1]
    for xi, yi in c:
        crosses = (yi > py) != (yj > py)
        if np.any(crosses):
            with np.errstate(divide="ignore", invalid="ignore"):
                xint = xi + (py - yi) * (xj - xi) / (yj - yi)
            inside ^= crosses & (px < xint)
        xj, yj = xi, yi
    return inside


def rasterize(p: SimplePolygon, mask_spec: RasterMask) -> RasterMask:
    """Cells whose centers fall inside ``p`` (even-odd rule)."""
    out = mask_spec.empty_like()
    g = mask_spec.transform.apply(p.corners)
    tol = 1e-9
    if (g[:, 0].min() < -tol or g[:, 1].min() < -tol
            or g[:, 0].max() > out.width + tol or g[:, 1].max() > out.height + tol):
        raise OutOfBounds("polygon exceeds the raster after transform")
    c0 = max(int(math.floor(g[:, 0].min() - 0.5)), 0)
    c1 = min(int(math.ceil(g[:, 0].max() + 0.5)), out.width)
    r0 = max(int(math.floor(g[:, 1].min() - 0.5)), 0)
    r1 = min(int(math.ceil(g[:, 1].max() + 0.5)), out.height)
    if c1 <= c0 or r1 <= r0:
        return out
    cols = np.arange(c0, c1) + 0.5
    rows = np.arange(r0, r1) + 0.5
    gx, gy = np.meshgrid(cols, rows)
    inside = points_in_polygon(np.column_stack([gx.ravel(), gy.ravel()]), g)
    out.cells[r0:r1, c0:c1] = inside.reshape(gx.shape)
    return out


def mask_iou(a: RasterMask, b: RasterMask) -> float:
    if a.cells.shape != b.cells.shape or a.transform != b.transform:
        raise DimMismatch("masks differ in dims or transform")
    union = int(np.count_nonzero(a.cells | b.cells))
    if union == 0:
        return 0.0
    return int(np.count_nonzero(a.cells & b.cells)) / union


def trace_cell_boundaries(cells: np.ndarray) -> list[np.ndarray]:
    """Boundary loops of a boolean cell grid, in lattice coordinates (x=col, y=row).

    Each loop runs counter-clockwise around filled area (holes come out
    clockwise) with collinear vertices removed. Vertices where two regions
    touch only diagonally make tracing ambiguous; callers must remove such
    pinches first.
    """
    cells = np.asarray(cells, dtype=bool)
    h, w = cells.shape
    padded = np.zeros((h + 2, w + 2), dtype=bool)
    padded[1:-1, 1:-1] = cells
    nxt: dict[tuple[int, int], tuple[int, int]] = {}
    rows, cols = np.nonzero(cells)
    for r, c in zip(rows.tolist(), cols.tolist()):
        pr, pc = r + 1, c + 1
        if not padded[pr - 1, pc]:
            nxt[(c, r)] = (c + 1, r)
        if not padded[pr, pc + 1]:
            nxt[(c + 1, r)] = (c + 1, r + 1)
        if not padded[pr + 1, pc]:
            nxt[(c + 1, r + 1)] = (c, r + 1)
        if not padded[pr, pc - 1]:
            nxt[(c, r + 1)] = (c, r)
    loops = []
    while nxt:
        start = min(nxt, key=lambda v: (v[1], v[0]))
        loop = [start]
        v = nxt.pop(start)
        while v != start:
            loop.append(v)
            v = nxt.pop(v)
        loops.append(_drop_collinear(np.array(loop, dtype=float)))
    return loops


def _drop_collinear(loop: np.ndarray) -> np.ndarray:
    keep = []
    n = len(loop)
    for k in range(n):
        prev, cur, nxt = loop[k - 1], loop[k], loop[(k + 1) % n]
        if abs(_orient(prev, cur, nxt)) > 1e-12:
            keep.append(k)
    return loop[keep]


def has_diagonal_pinch(cells: np.ndarray) -> bool:
    """True if any 2x2 window holds exactly a diagonal pair of filled cells."""
    c = np.asarray(cells, dtype=bool)
    p = np.zeros((c.shape[0] + 2, c.shape[1] + 2), dtype=bool)
    p[1:-1, 1:-1] = c
    a, b, cc, d = p[:-1, :-1], p[:-1, 1:], p[1:, :-1], p[1:, 1:]
    return bool(np.any((a & d & ~b & ~cc) | (b & cc & ~a & ~d)))


_FOUR = ndimage.generate_binary_structure(2, 1)


def is_simple_region(mask: np.ndarray) -> bool:
    """4-connected, no holes, no diagonal pinches: the cell set bounds a simple polygon."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return False
    _, n = ndimage.label(mask, structure=_FOUR)
    if n != 1 or has_diagonal_pinch(mask):
        return False
    outside = np.ones((mask.shape[0] + 2, mask.shape[1] + 2), dtype=bool)
    outside[1:-1, 1:-1] = ~mask
    _, n_out = ndimage.label(outside, structure=_FOUR)
    return n_out == 1
