"""Seed selection, room/wall center votes, and the vote-offset training loss.

Votes normally come from a learned network. Here they come either from a
ground-truth oracle (label centroids plus configurable noise) or from a votes
file written by an external model. The loss is provided as a plain function
with an analytic gradient so trainers and tests can check it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch, MissingLabels, TooFewPoints
from .synthgen import LabeledPointCloud

DEFAULT_SEEDS = 1024
DEFAULT_ALPHA = 10.0


@dataclass
class SeedSet:
    indices: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        if len(self.indices) != len(self.positions):
            raise LengthMismatch("indices and positions differ in length")
        if len(np.unique(self.indices)) != len(self.indices):
            raise ValueError("seed indices must be unique")

    def __len__(self) -> int:
        return len(self.indices)


@dataclass
class VoteSet:
    seeds: SeedSet
    room_vote_0: np.ndarray
    room_vote_1: np.ndarray
    wall_vote: np.ndarray

    def __post_init__(self):
        m = len(self.seeds)
        for name in ("room_vote_0", "room_vote_1", "wall_vote"):
            v = np.asarray(getattr(self, name), dtype=float).reshape(-1, 3)
            if len(v) != m:
                raise LengthMismatch(f"{name} has {len(v)} votes for {m} seeds")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"{name} contains non-finite votes")
            setattr(self, name, v)

    def __len__(self) -> int:
        return len(self.seeds)

    def offsets(self) -> "VoteOffsets":
        s = self.seeds.positions
        return VoteOffsets(self.room_vote_0 - s, self.room_vote_1 - s, self.wall_vote - s)


@dataclass
class VoteOffsets:
    room_offset_0: np.ndarray
    room_offset_1: np.ndarray
    wall_offset: np.ndarray

    def __post_init__(self):
        for name in ("room_offset_0", "room_offset_1", "wall_offset"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float).reshape(-1, 3))
        m = len(self.room_offset_0)
        if len(self.room_offset_1) != m or len(self.wall_offset) != m:
            raise LengthMismatch("offset arrays differ in length")

    def __len__(self) -> int:
        return len(self.room_offset_0)

    def as_array(self) -> np.ndarray:
        """Stacked ``(3, M, 3)`` array in (room 0, room 1, wall) order."""
        return np.stack([self.room_offset_0, self.room_offset_1, self.wall_offset])

    @classmethod
    def from_array(cls, arr) -> "VoteOffsets":
        arr = np.asarray(arr, dtype=float)
        return cls(arr[0], arr[1], arr[2])


@dataclass
class NoiseSpec:
    sigma: float = 0.0
    outlier_fraction: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if not 0.0 <= self.outlier_fraction <= 1.0:
            raise ValueError("outlier_fraction must be in [0, 1]")


def farthest_point_sampling(points, m: int, rng_seed: int = 0) -> np.ndarray:
    """Greedy farthest-point order, starting from the point nearest the centroid.

    Exact distance ties are broken with ``rng_seed``.
    """
    p = np.asarray(points, dtype=float)
    n = len(p)
    if m < 1 or m > n:
        raise TooFewPoints(f"cannot pick {m} seeds from {n} points")
    rng = np.random.default_rng(rng_seed)

    def pick(values, best):
        ties = np.flatnonzero(values == best)
        return int(ties[0]) if len(ties) == 1 else int(rng.choice(ties))

    d0 = np.einsum("ij,ij->i", p - p.mean(axis=0), p - p.mean(axis=0))
    chosen = np.empty(m, dtype=np.int64)
    chosen[0] = pick(d0, d0.min())
    dist = np.einsum("ij,ij->i", p - p[chosen[0]], p - p[chosen[0]])
    for k in range(1, m):
        nxt = pick(dist, dist.max())
        chosen[k] = nxt
        diff = p - p[nxt]
        np.minimum(dist, np.einsum("ij,ij->i", diff, diff), out=dist)
    return chosen


def subsample_seeds(cloud: LabeledPointCloud, m: int = DEFAULT_SEEDS, rng_seed: int = 0) -> SeedSet:
    idx = farthest_point_sampling(cloud.points, m, rng_seed)
    return SeedSet(idx, cloud.points[idx])


def _label_centroids(points: np.ndarray, members: list[np.ndarray], n_labels: int) -> np.ndarray:
    sums = np.zeros((n_labels, 3))
    counts = np.zeros(n_labels)
    for lab in members:
        np.add.at(sums, lab, points)
        np.add.at(counts, lab, 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return sums / counts[:, None]


def label_centroids(cloud: LabeledPointCloud) -> tuple[np.ndarray, np.ndarray]:
    """Room and wall centers: the 3D centroid of each label's member points.

    A point carrying two distinct room labels counts toward both rooms.
    """
    if not cloud.labeled:
        raise MissingLabels("cloud has no ground-truth labels")
    p = cloud.points
    r0, r1 = cloud.room_label_0, cloud.room_label_1
    n_rooms = int(max(r0.max(), r1.max())) + 1
    shared = r0 != r1
    room_c = _label_centroids(
        np.concatenate([p, p[shared]]), [np.concatenate([r0, r1[shared]])], n_rooms)
    wall_c = _label_centroids(p, [cloud.wall_label], int(cloud.wall_label.max()) + 1)
    return room_c, wall_c


def oracle_votes(cloud: LabeledPointCloud, seeds: SeedSet, noise: NoiseSpec | None = None) -> VoteSet:
    noise = noise or NoiseSpec()
    room_c, wall_c = label_centroids(cloud)
    i = seeds.indices
    v0 = room_c[cloud.room_label_0[i]]
    v1 = room_c[cloud.room_label_1[i]]
    vw = wall_c[cloud.wall_label[i]]
    m = len(seeds)
    rng = np.random.default_rng(noise.rng_seed)
    if noise.sigma > 0:
        v0 = v0 + rng.normal(0.0, noise.sigma, (m, 3))
        v1 = v1 + rng.normal(0.0, noise.sigma, (m, 3))
        vw = vw + rng.normal(0.0, noise.sigma, (m, 3))
    n_out = int(round(noise.outlier_fraction * m))
    if n_out:
        lo, hi = cloud.points.min(axis=0), cloud.points.max(axis=0)
        who = rng.choice(m, n_out, replace=False)
        v0, v1, vw = v0.copy(), v1.copy(), vw.copy()
        for v in (v0, v1, vw):
            v[who] = rng.uniform(lo, hi, (n_out, 3))
    return VoteSet(seeds, v0, v1, vw)


def smooth_l1(a):
    a = np.abs(a)
    return np.where(a < 1.0, 0.5 * a * a, a - 0.5)


def _smooth_l1_slope(a):
    return np.where(np.abs(a) < 1.0, a, np.sign(a))


def _pairing_errors(pred: VoteOffsets, gt: VoteOffsets):
    norm = lambda v: np.linalg.norm(v, axis=1)  # noqa: E731
    straight = norm(gt.room_offset_0 - pred.room_offset_0) + norm(gt.room_offset_1 - pred.room_offset_1)
    swapped = norm(gt.room_offset_0 - pred.room_offset_1) + norm(gt.room_offset_1 - pred.room_offset_0)
    return straight, swapped


def compute_vote_loss(pred: VoteOffsets, gt: VoteOffsets,
                      alpha: float = DEFAULT_ALPHA) -> tuple[float, float, float]:
    """(total, room, wall) loss over M seeds.

    The per-seed room error is the smaller of the two pairings of predicted
    and ground-truth room offsets, each scored as a sum of Euclidean error
    norms; the wall error is the norm of the wall offset error. Both go
    through smooth-L1 and are averaged over seeds.
    """
    if len(pred) != len(gt):
        raise LengthMismatch(f"pred has {len(pred)} seeds, gt has {len(gt)}")
    m = len(pred)
    if m == 0:
        return 0.0, 0.0, 0.0
    straight, swapped = _pairing_errors(pred, gt)
    room = float(smooth_l1(np.minimum(straight, swapped)).sum() / m)
    wall = float(smooth_l1(np.linalg.norm(gt.wall_offset - pred.wall_offset, axis=1)).sum() / m)
    return room + alpha * wall, room, wall


def vote_loss_gradient(pred: VoteOffsets, gt: VoteOffsets, alpha: float = DEFAULT_ALPHA) -> VoteOffsets:
    """Gradient of the total loss with respect to the predicted offsets.

    At pairing ties the straight pairing is used; at zero error the gradient
    of the norm is taken as zero.
    """
    if len(pred) != len(gt):
        raise LengthMismatch(f"pred has {len(pred)} seeds, gt has {len(gt)}")
    m = max(len(pred), 1)

    def unit(diff):
        n = np.linalg.norm(diff, axis=1, keepdims=True)
        return np.divide(diff, n, out=np.zeros_like(diff), where=n > 0)

    straight, swapped = _pairing_errors(pred, gt)
    use_swap = swapped < straight
    e = np.where(use_swap, swapped, straight)
    w = (_smooth_l1_slope(e) / m)[:, None]
    # d|g - x| / dx = -(g - x) / |g - x|
    t0 = np.where(use_swap[:, None], gt.room_offset_1, gt.room_offset_0)
    t1 = np.where(use_swap[:, None], gt.room_offset_0, gt.room_offset_1)
    g0 = -w * unit(t0 - pred.room_offset_0)
    g1 = -w * unit(t1 - pred.room_offset_1)
    wall_diff = gt.wall_offset - pred.wall_offset
    ew = np.linalg.norm(wall_diff, axis=1)
    gw = -(alpha * _smooth_l1_slope(ew) / m)[:, None] * unit(wall_diff)
    return VoteOffsets(g0, g1, gw)
