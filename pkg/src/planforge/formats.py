"""JSON/CSV readers and writers for scenes, votes, floorplans and reports."""
from __future__ import annotations

import csv
import io
import json
import os
from pathlib import Path

import numpy as np

from .assembly import Floorplan
from .errors import InvalidPolygon, SceneParseError, VoteMismatch
from .geom import Similarity, SimplePolygon
from .metrics import MetricsReport
from .synthgen import GroundTruthPlan, LabeledPointCloud
from .votes import SeedSet, VoteSet


def _dump(obj, path) -> None:
    text = json.dumps(obj, separators=(",", ":"), sort_keys=False)
    Path(path).write_text(text + "\n")


def _load(path, err=SceneParseError):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise err(f"{path}: not valid JSON ({exc.msg} at line {exc.lineno})") from exc


def _labels(a) -> list[int]:
    return [int(x) for x in a]


# scenes

def scene_to_dict(cloud: LabeledPointCloud, plan: GroundTruthPlan | None) -> dict:
    d = {"points": cloud.points.tolist()}
    if cloud.labeled:
        d["room_label_0"] = _labels(cloud.room_label_0)
        d["room_label_1"] = _labels(cloud.room_label_1)
        d["wall_label"] = _labels(cloud.wall_label)
    d["gt_rooms"] = [] if plan is None else [
        {"label": int(k), "polygon": p.corners.tolist()} for k, p in plan.rooms]
    return d


def scene_from_dict(d: dict) -> tuple[LabeledPointCloud, GroundTruthPlan]:
    try:
        pts = np.asarray(d["points"], dtype=float).reshape(-1, 3)
        labels = [d.get(k) for k in ("room_label_0", "room_label_1", "wall_label")]
        if any(x is not None for x in labels):
            if any(x is None for x in labels):
                raise SceneParseError("scene has only some of the label arrays")
            labels = [np.asarray(x, dtype=np.int64) for x in labels]
        else:
            labels = [None, None, None]
        cloud = LabeledPointCloud(pts, *labels)
        rooms = [(int(r["label"]), SimplePolygon(r["polygon"])) for r in d.get("gt_rooms", [])]
    except SceneParseError:
        raise
    except (KeyError, TypeError, ValueError, InvalidPolygon) as exc:
        raise SceneParseError(f"malformed scene: {exc}") from exc
    return cloud, GroundTruthPlan(rooms)


def write_scene(path, cloud, plan) -> None:
    _dump(scene_to_dict(cloud, plan), path)


def read_scene(path) -> tuple[LabeledPointCloud, GroundTruthPlan]:
    d = _load(path)
    if not isinstance(d, dict):
        raise SceneParseError(f"{path}: top level must be an object")
    return scene_from_dict(d)


# votes

def votes_to_dict(v: VoteSet) -> dict:
    return {
        "seed_indices": _labels(v.seeds.indices),
        "seed_positions": v.seeds.positions.tolist(),
        "room_vote_0": v.room_vote_0.tolist(),
        "room_vote_1": v.room_vote_1.tolist(),
        "wall_vote": v.wall_vote.tolist(),
    }


def votes_from_dict(d: dict, cloud: LabeledPointCloud | None = None) -> VoteSet:
    try:
        idx = np.asarray(d["seed_indices"], dtype=np.int64)
        pos = np.asarray(d["seed_positions"], dtype=float).reshape(-1, 3)
        r0, r1, w = (np.asarray(d[k], dtype=float).reshape(-1, 3)
                     for k in ("room_vote_0", "room_vote_1", "wall_vote"))
    except (KeyError, TypeError, ValueError) as exc:
        raise VoteMismatch(f"malformed votes: {exc}") from exc
    m = len(idx)
    if not (len(pos) == len(r0) == len(r1) == len(w) == m):
        raise VoteMismatch("vote arrays differ in length")
    if cloud is not None:
        n = len(cloud.points)
        if m and (idx.min() < 0 or idx.max() >= n):
            raise VoteMismatch("seed index outside the point cloud")
        if m and not np.allclose(cloud.points[idx], pos, atol=1e-6):
            raise VoteMismatch("seed positions do not match the indexed points")
    try:
        seeds = SeedSet(idx, pos)
    except ValueError as exc:
        raise VoteMismatch(str(exc)) from exc
    return VoteSet(seeds, r0, r1, w)


def write_votes(path, v: VoteSet) -> None:
    _dump(votes_to_dict(v), path)


def read_votes(path, cloud=None) -> VoteSet:
    return votes_from_dict(_load(path, VoteMismatch), cloud)


# floorplans

def floorplan_to_dict(plan: Floorplan, with_frame: bool = False) -> dict:
    d = {"rooms": [{"id": int(k), "polygon": p.corners.tolist()} for k, p in plan.rooms],
         "units": "meters"}
    if with_frame:
        d["frame"] = plan.frame.to_dict()
    return d


def floorplan_from_dict(d: dict) -> Floorplan:
    try:
        rooms = [(int(r["id"]), SimplePolygon(r["polygon"])) for r in d["rooms"]]
        frame = Similarity.from_dict(d["frame"]) if "frame" in d else Similarity()
        return Floorplan(rooms, frame)
    except (KeyError, TypeError, ValueError, InvalidPolygon) as exc:
        raise SceneParseError(f"malformed floorplan: {exc}") from exc


def gt_floorplan(plan: GroundTruthPlan) -> Floorplan:
    return Floorplan([(int(k), p) for k, p in plan.rooms])


def write_floorplan(path, plan: Floorplan) -> None:
    _dump(floorplan_to_dict(plan), path)


def read_floorplan(path) -> Floorplan:
    """Read a floorplan file; a scene file is accepted too and yields its reference rooms."""
    d = _load(path)
    if isinstance(d, dict) and "gt_rooms" in d and "rooms" not in d:
        return gt_floorplan(scene_from_dict(d)[1])
    if not isinstance(d, dict):
        raise SceneParseError(f"{path}: top level must be an object")
    return floorplan_from_dict(d)


# reports

def write_report(path, report: MetricsReport) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=2) + "\n")


def batch_csv(rows: list[tuple[str, MetricsReport]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sample", *MetricsReport.METRICS])
    for name, r in rows:
        w.writerow([name, *(f"{getattr(r, k):.6f}" for k in MetricsReport.METRICS)])
    if rows:
        means = [np.mean([getattr(r, k) for _, r in rows]) for k in MetricsReport.METRICS]
        w.writerow(["mean", *(f"{m:.6f}" for m in means)])
    return buf.getvalue()


def write_manifest(path, entries: list[dict]) -> None:
    Path(path).write_text(json.dumps({"samples": entries}, indent=2) + "\n")


def read_manifest(path) -> list[dict]:
    d = _load(path)
    base = os.path.dirname(os.path.abspath(path))
    out = []
    for e in d.get("samples", []):
        e = dict(e)
        for k in ("scene", "gt", "pred"):
            if k in e and not os.path.isabs(e[k]):
                e[k] = os.path.join(base, e[k])
        out.append(e)
    return out
