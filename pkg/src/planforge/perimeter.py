"""Room perimeter estimation from per-wall point sets.

Each wall set is projected to XY and fitted with a RANSAC line segment.
Duplicate segments are merged, near-axis segments are snapped, the segment
endpoints are ordered into a closed tour with a 2-opt search in which each
segment's own endpoint pair costs nothing to traverse, and consecutive
supporting lines are intersected to give the polygon corners.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInput, FewerThanTwoPoints, InvalidPolygon, TooFewSegments
from .geom import (
    Line2,
    Segment2,
    SimplePolygon,
    fit_line_ransac,
    line_intersection,
    project_segment,
    signed_area,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PerimeterConfig:
    theta_min: float = 15.0
    beta_min: float = 0.15
    theta_orth: float = 15.0
    inlier_tol: float = 0.02
    ransac_iterations: int = 500
    ransac_seed: int = 0
    parallel_corner_angle: float = 10.0
    # duplicates must also touch or nearly touch along their shared direction
    dedup_max_gap: float = 0.05
    # drop a corner whose neighbours are collinear with it within this distance
    collinear_tol: float = 0.01
    # a wall set whose RANSAC outliers still hold a line of at least this many
    # points yields extra segments (up to max_lines_per_wall); 0 disables it
    split_min_points: int = 6
    max_lines_per_wall: int = 3
    # extra lines must be backed by a gap-free run of inliers (neighbouring
    # inliers at most this far apart along the line)
    max_inlier_gap: float = 0.15
    # lines taken from a room's loose seeds (seeds with no wall cluster)
    max_loose_lines: int = 4

    def __post_init__(self):
        for name in ("theta_min", "theta_orth", "parallel_corner_angle"):
            v = getattr(self, name)
            if not 0.0 < v < 45.0:
                raise ValueError(f"{name} must lie in (0, 45) degrees")
        if self.beta_min <= 0 or self.inlier_tol <= 0:
            raise ValueError("beta_min and inlier_tol must be positive")
        if self.split_min_points < 0 or self.max_lines_per_wall < 1 or self.max_loose_lines < 0:
            raise ValueError("split_min_points, max_loose_lines must be >= 0 and max_lines_per_wall >= 1")
        if self.max_inlier_gap <= 0:
            raise ValueError("max_inlier_gap must be positive")


@dataclass(frozen=True)
class WallSegment:
    segment: Segment2
    line: Line2
    source_wall: int
    inlier_count: int

    @classmethod
    def from_endpoints(cls, a, b, source_wall: int = 0, inlier_count: int = 0) -> "WallSegment":
        seg = Segment2(a, b)
        return cls(seg, Line2.through(seg.a, seg.b), source_wall, inlier_count)


@dataclass
class PerimeterPath:
    order: list[int]
    pair_adjacent: bool
    cost: float = 0.0
    history: list[float] = field(default_factory=list)

    def segment_sequence(self) -> list[tuple[int, int, int]]:
        """(segment, entry node, exit node) in tour order; needs a pair-adjacent tour."""
        o = self.order
        return [(o[k] // 2, o[k], o[k + 1]) for k in range(0, len(o), 2)]


def _densest_run(line: Line2, pts: np.ndarray, inl: np.ndarray, max_gap: float) -> np.ndarray:
    """The largest subset of ``inl`` whose projections have no gap above ``max_gap``."""
    t = pts[inl] @ line.direction
    order = np.argsort(t, kind="stable")
    cuts = np.flatnonzero(np.diff(t[order]) > max_gap) + 1
    runs = np.split(order, cuts)
    best = max(runs, key=len)
    return np.sort(inl[best])


def _extract_lines(pts: np.ndarray, cfg: PerimeterConfig, source: int, seed: int,
                   max_lines: int, first_is_wall: bool) -> list[WallSegment]:
    """Sequential RANSAC. Lines after the first (or every line, for loose points)
    must hold a gap-free run of at least ``cfg.split_min_points`` inliers."""
    out = []
    rest = pts
    for j in range(max_lines):
        strict = j > 0 or not first_is_wall
        if strict and (cfg.split_min_points == 0 or len(rest) < max(cfg.split_min_points, 2)):
            break
        try:
            line, inl = fit_line_ransac(rest, cfg.inlier_tol, cfg.ransac_iterations, seed + 7919 * j)
            if strict:
                inl = _densest_run(line, rest, inl, cfg.max_inlier_gap)
                if len(inl) < cfg.split_min_points:
                    break
            seg = project_segment(line, rest[inl])
        except (FewerThanTwoPoints, DegenerateInput) as exc:
            if not strict:
                log.debug("wall %d skipped: %s", source, exc)
            break
        out.append(WallSegment(seg, line, source, len(inl)))
        keep = np.ones(len(rest), dtype=bool)
        keep[inl] = False
        rest = rest[keep]
    return out


def _xy(pts) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    return pts.reshape(-1, pts.shape[-1])[:, :2] if pts.size else pts.reshape(0, 2)


def fit_wall_segments(room_points_by_wall, cfg: PerimeterConfig = PerimeterConfig(),
                      wall_ids=None, loose_points=None) -> list[WallSegment]:
    """One segment per wall set, plus extra ones when a set plainly holds more lines.

    Extra lines come from the outliers of the previous fit, and from
    ``loose_points`` (room points that no wall claims), which recovers walls
    whose vote clusters merged or dissolved. Loose lines get ``source_wall`` -1.
    """
    out = []
    for h, pts in enumerate(room_points_by_wall):
        pts = _xy(pts)
        source = h if wall_ids is None else int(wall_ids[h])
        if len(pts) < 2:
            log.debug("wall %d skipped: %d point(s)", source, len(pts))
            continue
        out += _extract_lines(pts, cfg, source, cfg.ransac_seed + h, cfg.max_lines_per_wall, True)
    if loose_points is not None and cfg.max_loose_lines:
        pts = _xy(loose_points)
        out += _extract_lines(pts, cfg, -1, cfg.ransac_seed + 104729, cfg.max_loose_lines, False)
    return out


def _ray_crossings(origin, direction, segments, skip: int) -> int:
    count = 0
    for j, s in enumerate(segments):
        if j == skip:
            continue
        e = s.segment.b - s.segment.a
        denom = direction[0] * e[1] - direction[1] * e[0]
        if abs(denom) < 1e-12:
            continue
        w = s.segment.a - origin
        t = (w[0] * e[1] - w[1] * e[0]) / denom
        u = (w[0] * direction[1] - w[1] * direction[0]) / denom
        if t > 1e-9 and 0.0 <= u <= 1.0:
            count += 1
    return count


def interior_sides(segments: list[WallSegment]) -> np.ndarray:
    """+1/-1 when the room interior lies along +/- the segment's line normal, 0 if unclear.

    Decided by ray parity against the other segments from three points on the
    segment; a duplicate lying alongside makes both directions even or both
    odd, which leaves the side undecided.
    """
    sides = np.zeros(len(segments), dtype=int)
    for i, s in enumerate(segments):
        n = s.line.normal
        votes = 0
        for t in (0.25, 0.5, 0.75):
            p = s.segment.a + t * (s.segment.b - s.segment.a)
            plus = _ray_crossings(p, n, segments, i) % 2
            minus = _ray_crossings(p, -n, segments, i) % 2
            if plus != minus:
                votes += 1 if plus else -1
        if abs(votes) >= 2:
            sides[i] = int(np.sign(votes))
    return sides


def _is_duplicate(a: WallSegment, b: WallSegment, side_a: int, side_b: int,
                  cfg: PerimeterConfig) -> bool:
    if side_a and side_b:
        sa, sb = side_a, side_b
    else:
        sa, sb = 1, (1 if a.line.normal @ b.line.normal >= 0 else -1)
    na, oa = sa * a.line.normal, sa * a.line.offset
    nb, ob = sb * b.line.normal, sb * b.line.offset
    if math.degrees(math.acos(min(max(float(na @ nb), -1.0), 1.0))) > cfg.theta_min + 1e-9:
        return False
    centre = 0.5 * (a.segment.midpoint + b.segment.midpoint)
    # offsets taken relative to a point between the segments so the test does not depend on the origin
    if abs((oa - na @ centre) - (ob - nb @ centre)) > cfg.beta_min + 1e-12:
        return False
    d = a.segment.direction
    ta = sorted((float(a.segment.a @ d), float(a.segment.b @ d)))
    tb = sorted((float(b.segment.a @ d), float(b.segment.b @ d)))
    gap = max(tb[0] - ta[1], ta[0] - tb[1], 0.0)
    return gap <= cfg.dedup_max_gap


def _absorb(keep: WallSegment, others: list[WallSegment]) -> WallSegment:
    if not others:
        return keep
    d = keep.line.direction
    ends = [keep.segment.a, keep.segment.b] + [p for o in others for p in (o.segment.a, o.segment.b)]
    t = np.array([p @ d for p in ends])
    base = keep.line.normal * keep.line.offset
    seg = Segment2(base + t.min() * d, base + t.max() * d)
    return WallSegment(seg, keep.line, keep.source_wall, keep.inlier_count)


def dedup_segments(segments: list[WallSegment], cfg: PerimeterConfig = PerimeterConfig()) -> list[WallSegment]:
    """Remove duplicate segments, strongest (most inliers) first.

    A removed duplicate widens the survivor's extent along the survivor's own line.
    """
    sides = interior_sides(segments)
    order = sorted(range(len(segments)), key=lambda i: (-segments[i].inlier_count, i))
    kept: list[int] = []
    absorbed: dict[int, list[WallSegment]] = {}
    for i in order:
        host = next((k for k in kept
                     if _is_duplicate(segments[k], segments[i], sides[k], sides[i], cfg)), None)
        if host is None:
            kept.append(i)
            absorbed[i] = []
        else:
            absorbed[host].append(segments[i])
    return [_absorb(segments[k], absorbed[k]) for k in sorted(kept)]


def snap_to_axes(segments: list[WallSegment], cfg: PerimeterConfig = PerimeterConfig()) -> list[WallSegment]:
    out = []
    for s in segments:
        d = s.segment.direction
        from_x = math.degrees(math.acos(min(abs(float(d[0])), 1.0)))
        if from_x <= cfg.theta_orth + 1e-9:
            axis = np.array([math.copysign(1.0, d[0]), 0.0])
        elif 90.0 - from_x <= cfg.theta_orth + 1e-9:
            axis = np.array([0.0, math.copysign(1.0, d[1])])
        else:
            out.append(s)
            continue
        mid, half = s.segment.midpoint, 0.5 * s.segment.length
        a, b = mid - half * axis, mid + half * axis
        out.append(WallSegment(Segment2(a, b), Line2.through(a, b), s.source_wall, s.inlier_count))
    return out


def endpoint_costs(segments: list[WallSegment]) -> np.ndarray:
    """Node distance matrix over the 2n endpoints, with zero cost inside each segment."""
    pos = np.array([p for s in segments for p in (s.segment.a, s.segment.b)])
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    for s in range(len(segments)):
        dist[2 * s, 2 * s + 1] = dist[2 * s + 1, 2 * s] = 0.0
    return dist


def tour_cost(order, dist: np.ndarray) -> float:
    o = np.asarray(order)
    return float(dist[o, np.roll(o, -1)].sum())


def is_pair_adjacent(order) -> bool:
    n = len(order)
    where = {v: k for k, v in enumerate(order)}
    for s in range(n // 2):
        if (where[2 * s] - where[2 * s + 1]) % n not in (1, n - 1):
            return False
    return True


def _two_opt(tour: list[int], dist: np.ndarray, protect_pairs: bool, history: list[float]) -> list[int]:
    t = list(tour)
    n = len(t)
    cost = tour_cost(t, dist)
    improved = True
    while improved:
        improved = False
        for i in range(n - 1):
            a, b = t[i], t[i + 1]
            if protect_pairs and a // 2 == b // 2:
                continue
            for j in range(i + 2, n if i > 0 else n - 1):
                c, d = t[j], t[(j + 1) % n]
                if protect_pairs and c // 2 == d // 2:
                    continue
                delta = dist[a, c] + dist[b, d] - dist[a, b] - dist[c, d]
                if delta < -1e-12:
                    t[i + 1:j + 1] = t[i + 1:j + 1][::-1]
                    cost += delta
                    history.append(cost)
                    improved = True
                    a, b = t[i], t[i + 1]
                    if protect_pairs and a // 2 == b // 2:
                        break
    return t


def _repair(tour: list[int], dist: np.ndarray) -> list[int]:
    t = list(tour)
    for s in sorted({v // 2 for v in t}, key=lambda s: t.index(2 * s)):
        i, j = t.index(2 * s), t.index(2 * s + 1)
        if abs(i - j) in (1, len(t) - 1):
            continue
        t = [v for v in t if v // 2 != s]
        best = None
        for k in range(len(t)):
            u, w = t[k], t[(k + 1) % len(t)]
            if u // 2 == w // 2:
                continue
            for first, second in ((2 * s, 2 * s + 1), (2 * s + 1, 2 * s)):
                extra = dist[u, first] + dist[second, w] - dist[u, w]
                if best is None or extra < best[0] - 1e-12:
                    best = (extra, k, first, second)
        _, k, first, second = best
        t = t[:k + 1] + [first, second] + t[k + 1:]
    return t


def _canonical_tour(t: list[int], positions: np.ndarray) -> list[int]:
    n = len(t)
    k = next(k for k in range(n) if t[k] // 2 == t[(k + 1) % n] // 2)
    t = t[k:] + t[:k]
    if signed_area(positions[t]) < 0:
        t = t[::-1]
    # start from the lowest-numbered segment for a stable representation
    first = min(range(0, n, 2), key=lambda k: t[k] // 2)
    return t[first:] + t[:first]


def order_segments_2opt(segments: list[WallSegment]) -> PerimeterPath:
    n = len(segments)
    if n < 2:
        raise TooFewSegments(f"need >= 2 segments, got {n}")
    dist = endpoint_costs(segments)
    positions = np.array([p for s in segments for p in (s.segment.a, s.segment.b)])
    mids = np.array([s.segment.midpoint for s in segments])
    centre = mids.mean(axis=0)
    rel = mids - centre
    angle = np.arctan2(rel[:, 1], rel[:, 0])
    initial = []
    for s in sorted(range(n), key=lambda s: (angle[s], s)):
        seg = segments[s].segment
        e = seg.b - seg.a
        ccw = rel[s, 0] * e[1] - rel[s, 1] * e[0] >= 0
        initial += [2 * s, 2 * s + 1] if ccw else [2 * s + 1, 2 * s]

    history = [tour_cost(initial, dist)]
    tour = _two_opt(initial, dist, protect_pairs=False, history=history)
    if not is_pair_adjacent(tour):
        tour = _repair(tour, dist)
        history.append(tour_cost(tour, dist))
        tour = _two_opt(tour, dist, protect_pairs=True, history=history)
    # pair-preserving search from the initial tour as a floor on quality
    alt_history = [history[0]]
    alt = _two_opt(initial, dist, protect_pairs=True, history=alt_history)
    if tour_cost(alt, dist) < tour_cost(tour, dist) - 1e-12:
        tour, history = alt, alt_history
    tour = _canonical_tour(tour, positions)
    return PerimeterPath(tour, is_pair_adjacent(tour), tour_cost(tour, dist), history)


def extrude_polygon(path: PerimeterPath, segments: list[WallSegment],
                    cfg: PerimeterConfig = PerimeterConfig()) -> SimplePolygon:
    if not path.pair_adjacent:
        raise ValueError("extrusion needs a pair-adjacent tour")
    positions = np.array([p for s in segments for p in (s.segment.a, s.segment.b)])
    seq = path.segment_sequence()
    sin_par = math.sin(math.radians(cfg.parallel_corner_angle))
    corners = []
    for k, (s, _, exit_node) in enumerate(seq):
        nxt, entry_node, _ = seq[(k + 1) % len(seq)]
        p, q = positions[exit_node], positions[entry_node]
        gap = float(np.hypot(*(q - p)))
        la, lb = segments[s].line, segments[nxt].line
        cross = abs(la.normal[0] * lb.normal[1] - la.normal[1] * lb.normal[0])
        x = line_intersection(la, lb) if cross >= sin_par else None
        if x is not None:
            reach = max(2.0 * gap, 0.5)
            if min(np.hypot(*(x - p)), np.hypot(*(x - q))) > reach:
                x = None
        corners.append(x if x is not None else 0.5 * (p + q))
    return SimplePolygon(_merge_close(np.array(corners), 1e-4))


def _merge_close(corners: np.ndarray, tol: float) -> np.ndarray:
    out = []
    for c in corners:
        if not out or np.hypot(*(c - out[-1])) > tol:
            out.append(c)
    while len(out) > 1 and np.hypot(*(out[0] - out[-1])) <= tol:
        out.pop()
    if len(out) < 3:
        raise InvalidPolygon(f"only {len(out)} distinct corner(s) after extrusion")
    return np.array(out)


def drop_collinear_corners(poly: SimplePolygon, tol: float) -> SimplePolygon:
    """Remove corners lying within ``tol`` of the chord between their neighbours."""
    c = list(poly.corners)
    changed = True
    while changed and len(c) > 3:
        changed = False
        for k in range(len(c)):
            prev, cur, nxt = c[k - 1], c[k], c[(k + 1) % len(c)]
            chord = nxt - prev
            length = float(np.hypot(*chord))
            if length == 0:
                continue
            dev = abs(chord[0] * (cur - prev)[1] - chord[1] * (cur - prev)[0]) / length
            if dev <= tol and (cur - prev) @ chord > 0 and (nxt - cur) @ chord > 0:
                del c[k]
                changed = True
                break
    return SimplePolygon(np.array(c))


@dataclass
class PerimeterStages:
    fitted: list[WallSegment]
    deduped: list[WallSegment]
    snapped: list[WallSegment]
    path: PerimeterPath
    polygon: SimplePolygon


def perimeter_stages(room_walls, cfg: PerimeterConfig = PerimeterConfig(), wall_ids=None,
                     loose_points=None) -> PerimeterStages:
    fitted = fit_wall_segments(room_walls, cfg, wall_ids, loose_points)
    if len(fitted) < 2:
        raise TooFewSegments(f"{len(fitted)} wall segment(s) could be fitted")
    deduped = dedup_segments(fitted, cfg)
    snapped = snap_to_axes(deduped, cfg)
    if len(snapped) < 2:
        raise TooFewSegments(f"{len(snapped)} segment(s) left after deduplication")
    path = order_segments_2opt(snapped)
    polygon = extrude_polygon(path, snapped, cfg)
    if cfg.collinear_tol > 0:
        polygon = drop_collinear_corners(polygon, cfg.collinear_tol)
    return PerimeterStages(fitted, deduped, snapped, path, polygon)


def estimate_room_perimeter(room_walls, cfg: PerimeterConfig = PerimeterConfig(), wall_ids=None,
                            loose_points=None) -> SimplePolygon:
    return perimeter_stages(room_walls, cfg, wall_ids, loose_points).polygon
