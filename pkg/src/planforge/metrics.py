"""Corner, edge and room precision/recall between a reference plan and a prediction."""
from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.optimize import linear_sum_assignment

from .assembly import Floorplan
from .errors import BothEmpty
from .geom import GridTransform, RasterMask, SimplePolygon, rasterize


@dataclass(frozen=True)
class EvalConfig:
    grid: int = 256
    corner_tol_px: float = 10.0
    room_iou_thresh: float = 0.7
    margin_px: int = 8
    # added to a corner pair's cost when its rooms are not matched to each
    # other; only reorders near-ties between coincident corners of
    # neighbouring rooms, the TP test still uses the raw distance
    room_consistency_px: float = 1.0

    def __post_init__(self):
        if self.grid < 64:
            raise ValueError("grid must be >= 64")
        if not self.corner_tol_px > 0:
            raise ValueError("corner_tol_px must be > 0")
        if not 0 < self.room_iou_thresh < 1:
            raise ValueError("room_iou_thresh must be in (0, 1)")
        if not 0 <= 2 * self.margin_px < self.grid:
            raise ValueError("margin_px out of range")
        if self.room_consistency_px < 0:
            raise ValueError("room_consistency_px must be >= 0")


@dataclass
class Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        d = self.tp + self.fp
        return 1.0 if d == 0 else self.tp / d

    @property
    def recall(self) -> float:
        d = self.tp + self.fn
        return 1.0 if d == 0 else self.tp / d


@dataclass
class MetricsReport:
    corners: Counts = field(default_factory=Counts)
    edges: Counts = field(default_factory=Counts)
    rooms: Counts = field(default_factory=Counts)

    corner_precision = property(lambda self: self.corners.precision)
    corner_recall = property(lambda self: self.corners.recall)
    edge_precision = property(lambda self: self.edges.precision)
    edge_recall = property(lambda self: self.edges.recall)
    room_precision = property(lambda self: self.rooms.precision)
    room_recall = property(lambda self: self.rooms.recall)

    METRICS = ("corner_precision", "corner_recall", "edge_precision",
               "edge_recall", "room_precision", "room_recall")

    def scores(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in self.METRICS}

    def to_dict(self) -> dict:
        out = dict(self.scores())
        out["counts"] = {"corners": asdict(self.corners), "edges": asdict(self.edges),
                         "rooms": asdict(self.rooms)}
        return out


@dataclass
class ProjectedPlan:
    """Room corner lists in pixel units, one array per room (ids kept alongside)."""

    ids: list[int]
    rooms: list[np.ndarray]

    def corners(self) -> np.ndarray:
        if not self.rooms:
            return np.zeros((0, 2))
        return np.concatenate(self.rooms)

    def room_of_corner(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.rooms)), [len(r) for r in self.rooms]).astype(np.int64)

    def edges(self) -> list[tuple[int, int]]:
        """Edges as index pairs into `corners()`, per room, never crossing rooms."""
        out, base = [], 0
        for r in self.rooms:
            n = len(r)
            out += [(base + i, base + (i + 1) % n) for i in range(n)]
            base += n
        return out


def joint_project(gt: Floorplan, pred: Floorplan, cfg: EvalConfig = EvalConfig()):
    """Project both plans with one similarity that fits all corners into the margin box."""
    polys = [p.corners for _, p in gt.rooms] + [p.corners for _, p in pred.rooms]
    if not polys:
        raise BothEmpty("both plans are empty")
    allc = np.concatenate(polys)
    lo, hi = allc.min(axis=0), allc.max(axis=0)
    extent = float(np.max(hi - lo))
    span = cfg.grid - 2 * cfg.margin_px
    scale = span / extent if extent > 0 else 1.0
    centre = (lo + hi) / 2
    offset = cfg.grid / 2 - scale * centre
    tf = GridTransform(scale, tuple(offset))

    def proj(plan):
        return ProjectedPlan([k for k, _ in plan.rooms], [tf.apply(p.corners) for _, p in plan.rooms])

    return proj(gt), proj(pred), tf


def match_corners(gt_px: ProjectedPlan, pred_px: ProjectedPlan, cfg: EvalConfig = EvalConfig(),
                  room_pairs: dict[int, int] | None = None):
    """One-to-one min-distance matching; returns counts and ``{pred index: gt index}`` for TPs.

    ``room_pairs`` maps matched predicted rooms to reference rooms (by
    position); when given, pairing a corner across unmatched rooms costs
    ``cfg.room_consistency_px`` extra.
    """
    g, p = gt_px.corners(), pred_px.corners()
    matching: dict[int, int] = {}
    if len(g) and len(p):
        d = np.hypot(p[:, None, 0] - g[None, :, 0], p[:, None, 1] - g[None, :, 1])
        cost = d
        if room_pairs:
            partner = np.array([room_pairs.get(i, -1) for i in range(len(pred_px.rooms))], dtype=np.int64)
            pr = partner[pred_px.room_of_corner()]
            mismatch = (pr[:, None] >= 0) & (pr[:, None] != gt_px.room_of_corner()[None, :])
            cost = d + cfg.room_consistency_px * mismatch
        rows, cols = linear_sum_assignment(cost)
        for r, c in zip(rows, cols):
            if d[r, c] <= cfg.corner_tol_px:
                matching[int(r)] = int(c)
    tp = len(matching)
    return Counts(tp, len(p) - tp, len(g) - tp), matching


def match_edges(gt_px: ProjectedPlan, pred_px: ProjectedPlan, matching: dict[int, int],
                cfg: EvalConfig = EvalConfig()) -> Counts:
    gt_edges = {frozenset(e) for e in gt_px.edges()}
    pred_edges = pred_px.edges()
    tp = 0
    for a, b in pred_edges:
        if a in matching and b in matching and frozenset((matching[a], matching[b])) in gt_edges:
            tp += 1
    return Counts(tp, len(pred_edges) - tp, len(gt_edges) - tp)


def _room_masks(plan: ProjectedPlan, cfg: EvalConfig) -> list[np.ndarray]:
    spec = RasterMask(cfg.grid, cfg.grid, GridTransform(1.0))
    return [rasterize(SimplePolygon(r, validate=False), spec).cells for r in plan.rooms]


def match_rooms(gt_px: ProjectedPlan, pred_px: ProjectedPlan, cfg: EvalConfig = EvalConfig()) -> Counts:
    """Greedy matching in descending IOU; a pair counts only if IOU exceeds the threshold."""
    return room_matching(gt_px, pred_px, cfg)[0]


def room_matching(gt_px: ProjectedPlan, pred_px: ProjectedPlan,
                  cfg: EvalConfig = EvalConfig()) -> tuple[Counts, dict[int, int]]:
    """Room counts plus the ``{pred room: gt room}`` pairs (by position) that were matched."""
    gm, pm = _room_masks(gt_px, cfg), _room_masks(pred_px, cfg)
    pairs = []
    for i, a in enumerate(pm):
        for j, b in enumerate(gm):
            inter = np.count_nonzero(a & b)
            if inter:
                union = np.count_nonzero(a | b)
                pairs.append((inter / union, i, j))
    pairs.sort(key=lambda t: (-t[0], t[1], t[2]))
    matched: dict[int, int] = {}
    used_g = set()
    for iou, i, j in pairs:
        if iou <= cfg.room_iou_thresh:
            break
        if i in matched or j in used_g:
            continue
        matched[i] = j
        used_g.add(j)
    tp = len(matched)
    return Counts(tp, len(pm) - tp, len(gm) - tp), matched


def evaluate(gt: Floorplan, pred: Floorplan, cfg: EvalConfig = EvalConfig()) -> MetricsReport:
    g, p, _ = joint_project(gt, pred, cfg)
    rooms, room_pairs = room_matching(g, p, cfg)
    corners, matching = match_corners(g, p, cfg, room_pairs)
    return MetricsReport(corners, match_edges(g, p, matching, cfg), rooms)


def mean_scores(reports) -> dict[str, float]:
    reports = list(reports)
    if not reports:
        return {k: float("nan") for k in MetricsReport.METRICS}
    return {k: float(np.mean([getattr(r, k) for r in reports])) for k in MetricsReport.METRICS}

