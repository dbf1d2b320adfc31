"""Vote clustering: DBSCAN, backtracking to seeds, pruning, and room/wall intersection."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import LengthMismatch

NOISE = -1


@dataclass(frozen=True)
class DbscanParams:
    eps: float
    min_pts: int = 8

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be > 0")
        if self.min_pts < 1:
            raise ValueError("min_pts must be >= 1")


ROOM_DBSCAN = DbscanParams(eps=0.05, min_pts=8)
WALL_DBSCAN = DbscanParams(eps=0.025, min_pts=8)


def dbscan(points, params: DbscanParams) -> np.ndarray:
    """Cluster labels per point (`NOISE` for noise).

    A point is core when at least ``min_pts`` points, itself included, lie
    within ``eps`` (inclusive). Cluster ids are numbered by their lowest core
    point index. A border point joins the lowest-id cluster among its core
    neighbors.
    """
    p = np.asarray(points, dtype=float)
    if p.ndim == 1:
        p = p.reshape(-1, 1)
    n = len(p)
    labels = np.full(n, NOISE, dtype=np.int64)
    if n == 0:
        return labels
    tree = cKDTree(p)
    nbrs = tree.query_ball_point(p, r=params.eps)
    lengths = np.fromiter((len(x) for x in nbrs), dtype=np.int64, count=n)
    indptr = np.concatenate([[0], np.cumsum(lengths)])
    indices = np.fromiter((j for x in nbrs for j in x), dtype=np.int64, count=int(indptr[-1]))
    core = lengths >= params.min_pts

    def neighbours(frontier):
        return np.concatenate([indices[indptr[f]:indptr[f + 1]] for f in frontier])

    cid = 0
    for i in np.flatnonzero(core):
        if labels[i] != NOISE:
            continue
        labels[i] = cid
        frontier = np.array([i])
        while frontier.size:
            nb = np.unique(neighbours(frontier))
            nb = nb[core[nb] & (labels[nb] == NOISE)]
            labels[nb] = cid
            frontier = nb
        cid += 1

    for i in np.flatnonzero(~core):
        nb = indices[indptr[i]:indptr[i + 1]]
        nb = nb[core[nb]]
        if nb.size:
            labels[i] = labels[nb].min()
    return labels


def backtrack_labels(m: int, room_assign, wall_assign) -> tuple[np.ndarray, np.ndarray]:
    """Per-seed room label pairs ``(M, 2)`` and wall labels ``(M,)``.

    ``room_assign`` labels the 2M concatenated room votes (all room-0 votes,
    then all room-1 votes).
    """
    room_assign = np.asarray(room_assign, dtype=np.int64)
    wall_assign = np.asarray(wall_assign, dtype=np.int64)
    if len(room_assign) != 2 * m or len(wall_assign) != m:
        raise LengthMismatch(f"expected {2 * m} room and {m} wall labels, got "
                             f"{len(room_assign)} and {len(wall_assign)}")
    return np.column_stack([room_assign[:m], room_assign[m:]]), wall_assign.copy()


def room_members(room_pairs: np.ndarray) -> dict[int, np.ndarray]:
    """Seeds belonging to each room cluster; a seed with two labels joins both."""
    m = len(room_pairs)
    seeds = np.concatenate([np.arange(m), np.arange(m)])
    labels = room_pairs.T.reshape(-1)
    ok = labels != NOISE
    pairs = np.unique(np.column_stack([labels[ok], seeds[ok]]), axis=0)
    out: dict[int, np.ndarray] = {}
    if len(pairs):
        cuts = np.flatnonzero(np.diff(pairs[:, 0])) + 1
        for chunk in np.split(pairs, cuts):
            out[int(chunk[0, 0])] = chunk[:, 1]
    return out


def _compact(labels: np.ndarray, keep: list[int]) -> np.ndarray:
    lut = {old: new for new, old in enumerate(sorted(keep))}
    out = np.full(labels.shape, NOISE, dtype=np.int64)
    for old, new in lut.items():
        out[labels == old] = new
    return out


def prune_spurious(room_pairs, wall_labels, m: int | None = None,
                   room_threshold_fraction: float = 0.05,
                   wall_threshold_fraction: float = 0.01) -> tuple[np.ndarray, np.ndarray]:
    """Drop clusters with fewer member seeds than a fraction of M, then renumber densely."""
    room_pairs = np.asarray(room_pairs, dtype=np.int64)
    wall_labels = np.asarray(wall_labels, dtype=np.int64)
    m = len(wall_labels) if m is None else m
    rooms = room_members(room_pairs)
    keep_rooms = [k for k, s in rooms.items() if len(s) >= room_threshold_fraction * m]
    walls, counts = np.unique(wall_labels[wall_labels != NOISE], return_counts=True)
    keep_walls = [int(w) for w, c in zip(walls, counts) if c >= wall_threshold_fraction * m]
    return _compact(room_pairs, keep_rooms), _compact(wall_labels, keep_walls)


@dataclass
class RoomWallSets:
    rooms: dict[int, np.ndarray] = field(default_factory=dict)
    walls: dict[int, list[np.ndarray]] = field(default_factory=dict)
    wall_ids: dict[int, list[int]] = field(default_factory=dict)
    # room seeds that belong to no surviving wall cluster
    unassigned: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def walls_per_room(self) -> dict[tuple[int, int], np.ndarray]:
        return {(k, j): s for k, ws in self.walls.items() for j, s in enumerate(ws)}


def intersect_rooms_walls(room_pairs, wall_labels) -> RoomWallSets:
    room_pairs = np.asarray(room_pairs, dtype=np.int64)
    wall_labels = np.asarray(wall_labels, dtype=np.int64)
    out = RoomWallSets()
    for k, seeds in sorted(room_members(room_pairs).items()):
        out.rooms[k] = seeds
        w = wall_labels[seeds]
        ids = [int(x) for x in np.unique(w[w != NOISE])]
        out.walls[k] = [seeds[w == x] for x in ids]
        out.wall_ids[k] = ids
        out.unassigned[k] = seeds[w == NOISE]
    return out


