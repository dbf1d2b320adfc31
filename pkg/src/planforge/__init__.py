"""Floorplan reconstruction from labeled wall point clouds via room and wall center votes."""
from .assembly import Floorplan, assemble, resolve_overlaps
from .cluster import DbscanParams, dbscan
from .metrics import EvalConfig, MetricsReport, evaluate
from .perimeter import PerimeterConfig, estimate_room_perimeter
from .pipeline import PipelineConfig, reconstruct
from .synthgen import SceneSpec, generate_scene
from .votes import NoiseSpec, compute_vote_loss, oracle_votes, subsample_seeds

__version__ = "0.1.0"

__all__ = [
    "Floorplan", "assemble", "resolve_overlaps", "DbscanParams", "dbscan", "EvalConfig",
    "MetricsReport", "evaluate", "PerimeterConfig", "estimate_room_perimeter", "PipelineConfig",
    "reconstruct", "SceneSpec", "generate_scene", "NoiseSpec", "compute_vote_loss",
    "oracle_votes", "subsample_seeds",
]
