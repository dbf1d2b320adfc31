"""End-to-end reconstruction: point cloud and votes in, floorplan out."""
from __future__ import annotations

import logging
import multiprocessing as mp
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .assembly import Floorplan, assemble, check_disjoint, overlap_grid, resolve_overlaps
from .cluster import (ROOM_DBSCAN, WALL_DBSCAN, DbscanParams, backtrack_labels, dbscan,
                      intersect_rooms_walls, prune_spurious)
from .errors import InvalidPolygon, NoRoomsFound, TooFewSegments
from .geom import Similarity, SimplePolygon
from .metrics import EvalConfig
from .perimeter import PerimeterConfig, estimate_room_perimeter
from .synthgen import LabeledPointCloud, SceneSpec, apply_frame, normalization_frame
from .votes import DEFAULT_SEEDS, NoiseSpec, SeedSet, VoteSet, oracle_votes, subsample_seeds

log = logging.getLogger(__name__)

MAX_POINTS = 16384


@dataclass
class PipelineConfig:
    scene: SceneSpec = field(default_factory=SceneSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    room_dbscan: DbscanParams = ROOM_DBSCAN
    wall_dbscan: DbscanParams = WALL_DBSCAN
    perimeter: PerimeterConfig = field(default_factory=PerimeterConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    threads: int = 1
    max_points: int = MAX_POINTS
    n_seeds: int = DEFAULT_SEEDS
    room_threshold_fraction: float = 0.05
    wall_threshold_fraction: float = 0.01
    overlap_resolution: int = 256
    recover_unassigned: bool = True
    rng_seed: int = 0

    def __post_init__(self):
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.max_points < self.n_seeds:
            raise ValueError("max_points must be >= n_seeds")


@dataclass
class Reconstruction:
    plan: Floorplan
    timings: dict[str, float]
    total_seconds: float
    dropped_rooms: list[int] = field(default_factory=list)


class _Timer:
    def __init__(self):
        self.stages: dict[str, float] = {}
        self.start = self._t = time.perf_counter()

    def total(self) -> float:
        return time.perf_counter() - self.start

    def lap(self, name: str) -> None:
        now = time.perf_counter()
        self.stages[name] = self.stages.get(name, 0.0) + now - self._t
        self._t = now


def _room_task(args):
    room_id, walls, loose, cfg = args
    try:
        return room_id, estimate_room_perimeter(walls, cfg, loose_points=loose), None
    except (TooFewSegments, InvalidPolygon) as exc:
        return room_id, None, f"{type(exc).__name__}: {exc}"


def _run_rooms(tasks, threads: int):
    if threads == 1 or len(tasks) <= 1:
        return [_room_task(t) for t in tasks]
    # processes, since the per-room work is Python-bound; results come back in task order
    ctx = mp.get_context("fork")
    with ProcessPoolExecutor(max_workers=min(threads, len(tasks)), mp_context=ctx) as ex:
        return list(ex.map(_room_task, tasks))


def room_tasks(votes: VoteSet, cfg: PipelineConfig) -> list[tuple]:
    """Cluster normalized-frame votes into per-room ``(id, wall point sets, loose points, config)`` jobs."""
    m = len(votes)
    room_assign = dbscan(np.concatenate([votes.room_vote_0, votes.room_vote_1]), cfg.room_dbscan)
    wall_assign = dbscan(votes.wall_vote, cfg.wall_dbscan)
    pairs, walls = backtrack_labels(m, room_assign, wall_assign)
    pairs, walls = prune_spurious(pairs, walls, m, cfg.room_threshold_fraction,
                                  cfg.wall_threshold_fraction)
    sets = intersect_rooms_walls(pairs, walls)
    xy = votes.seeds.positions[:, :2]
    tasks = []
    for k in sorted(sets.rooms):
        # seeds whose wall votes were lost still sit on the room's walls
        loose = xy[sets.unassigned[k]] if cfg.recover_unassigned else None
        tasks.append((k, [xy[s] for s in sets.walls[k]], loose, cfg.perimeter))
    return tasks


def room_polygons(votes: VoteSet, cfg: PipelineConfig) -> tuple[list[tuple[int, SimplePolygon]], list[int]]:
    """Estimate one polygon per room cluster; also returns the ids of rooms that failed."""
    polys, dropped = [], []
    for k, poly, err in _run_rooms(room_tasks(votes, cfg), cfg.threads):
        if poly is None:
            log.warning("room %d dropped: %s", k, err)
            dropped.append(k)
        else:
            polys.append((k, poly))
    return polys, dropped


def prepare_votes(cloud: LabeledPointCloud, cfg: PipelineConfig, votes: VoteSet | None = None,
                  timer: _Timer | None = None) -> tuple[VoteSet, Similarity]:
    """Subsample, normalize and vote. Returns the votes in the normalized frame and that frame."""
    timer = timer or _Timer()
    if votes is None and len(cloud) > cfg.max_points:
        rng = np.random.default_rng([cfg.rng_seed, 3])
        cloud = cloud.subset(np.sort(rng.choice(len(cloud), cfg.max_points, replace=False)))
    timer.lap("subsample")

    frame = normalization_frame(cloud.points)
    norm, _ = apply_frame(cloud, None, frame)
    timer.lap("normalize")

    if votes is None:
        seeds = subsample_seeds(norm, cfg.n_seeds, cfg.rng_seed)
        timer.lap("seeds")
        votes = oracle_votes(norm, seeds, cfg.noise)
    else:
        seeds = SeedSet(votes.seeds.indices, frame.forward(votes.seeds.positions))
        votes = VoteSet(seeds, frame.forward(votes.room_vote_0), frame.forward(votes.room_vote_1),
                        frame.forward(votes.wall_vote))
    timer.lap("votes")
    return votes, frame


def reconstruct(cloud: LabeledPointCloud, cfg: PipelineConfig = PipelineConfig(),
                votes: VoteSet | None = None) -> Reconstruction:
    """Reconstruct a floorplan in the cloud's own frame.

    Without ``votes`` the cloud must carry labels and oracle votes are drawn
    with ``cfg.noise``. Given votes are expected in the cloud's frame with seed
    indices into the full cloud, so no point subsampling happens then.
    Raises `NoRoomsFound` (carrying the empty plan) when nothing survives.
    """
    timer = _Timer()
    votes, frame = prepare_votes(cloud, cfg, votes, timer)

    polys, dropped = room_polygons(votes, cfg)
    timer.lap("rooms")

    raw = assemble(polys, frame)
    timer.lap("assemble")
    plan = resolve_overlaps(raw, cfg.overlap_resolution)
    if len(raw) > 1:
        check_disjoint(plan, overlap_grid(raw, cfg.overlap_resolution))
    timer.lap("overlaps")

    total = timer.total()
    for name, sec in timer.stages.items():
        log.info("stage %-10s %8.4f s", name, sec)
    log.info("total %.4f s, %d room(s)", total, len(plan))
    result = Reconstruction(plan, timer.stages, total, dropped)
    if not plan.rooms:
        raise NoRoomsFound("no room survived clustering and perimeter estimation", result)
    return result
