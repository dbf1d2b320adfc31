"""Command-line entry point: gen, reconstruct, eval, render, bench."""
from __future__ import annotations

import argparse
import json
import logging
import multiprocessing as mp
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path


from . import formats
from .cluster import DbscanParams
from .errors import (BothEmpty, InvariantViolation, NoRoomsFound, PlanforgeError, SceneParseError,
                     VoteMismatch)
from .metrics import EvalConfig, evaluate
from .pipeline import PipelineConfig, reconstruct
from .render import render_svg
from .synthgen import SceneSpec, generate_scene
from .votes import NoiseSpec

log = logging.getLogger("planforge")

EXIT_OK, EXIT_INPUT, EXIT_EMPTY, EXIT_INTERNAL = 0, 2, 3, 4


class InputError(Exception):
    pass


def _setup_logging() -> None:
    level = os.environ.get("PLANFORGE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


# gen

def cmd_gen(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(args.count):
        seed = args.seed + i
        spec = SceneSpec(n_rooms_max=args.max_rooms, rng_seed=seed)
        cloud, plan = generate_scene(spec)
        name = f"scene_{seed:05d}"
        formats.write_scene(out / f"{name}.json", cloud, plan)
        formats.write_floorplan(out / f"{name}_gt.json", formats.gt_floorplan(plan))
        entries.append({"name": name, "seed": seed, "scene": f"{name}.json", "gt": f"{name}_gt.json"})
        log.info("generated %s: %d rooms, %d points", name, len(plan.rooms), len(cloud))
    formats.write_manifest(out / "manifest.json", entries)
    print(out / "manifest.json")
    return EXIT_OK


# reconstruct

def _pipeline_config(args, threads: int | None = None) -> PipelineConfig:
    return PipelineConfig(
        noise=NoiseSpec(args.noise_sigma, args.outlier_frac, args.seed),
        room_dbscan=DbscanParams(args.eps_room),
        wall_dbscan=DbscanParams(args.eps_wall),
        threads=args.threads if threads is None else threads,
        rng_seed=args.seed,
    )


def reconstruct_file(scene_path, votes_src: str, cfg: PipelineConfig):
    """Returns ``(plan, timings, total, empty)``."""
    cloud, _ = formats.read_scene(scene_path)
    votes = None
    if votes_src != "oracle":
        votes = formats.read_votes(votes_src, cloud)
    try:
        res = reconstruct(cloud, cfg, votes)
        empty = False
    except NoRoomsFound as exc:
        res, empty = exc.result, True
    return res.plan, res.timings, res.total_seconds, empty


def _batch_task(job):
    entry, out_dir, cfg = job
    plan, timings, total, empty = reconstruct_file(entry["scene"], "oracle", cfg)
    pred = Path(out_dir) / f"{entry['name']}_pred.json"
    formats.write_floorplan(pred, plan)
    return {**entry, "pred": str(pred.resolve())}, total, empty


def cmd_reconstruct(args) -> int:
    src = Path(args.scene)
    if src.name.endswith("manifest.json"):
        return _reconstruct_batch(args)
    cfg = _pipeline_config(args)
    plan, timings, total, empty = reconstruct_file(src, args.votes, cfg)
    out = Path(args.out) if args.out else src.with_name(src.stem + "_pred.json")
    formats.write_floorplan(out, plan)
    if args.svg:
        Path(args.svg).write_text(render_svg(plan))
    log.info("timings %s total %.4f s", json.dumps({k: round(v, 6) for k, v in timings.items()}), total)
    print(out)
    if empty:
        print("no rooms found; wrote an empty floorplan", file=sys.stderr)
        return EXIT_EMPTY
    return EXIT_OK


def _reconstruct_batch(args) -> int:
    entries = formats.read_manifest(args.scene)
    out = Path(args.out or Path(args.scene).parent)
    out.mkdir(parents=True, exist_ok=True)
    # scenes run in parallel, rooms inside each scene run sequentially
    cfg = _pipeline_config(args, threads=1)
    jobs = [(e, str(out), cfg) for e in entries]
    if args.threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.threads, mp_context=mp.get_context("fork")) as ex:
            results = list(ex.map(_batch_task, jobs))
    else:
        results = [_batch_task(j) for j in jobs]
    formats.write_manifest(out / "manifest.json", [r[0] for r in results])
    print(out / "manifest.json")
    return EXIT_EMPTY if any(r[2] for r in results) else EXIT_OK


# eval

def cmd_eval(args) -> int:
    cfg = EvalConfig(grid=args.grid)
    if args.pred is None:
        entries = formats.read_manifest(args.gt)
        rows = []
        for e in entries:
            if "pred" not in e:
                raise InputError(f"manifest entry {e.get('name')} has no prediction")
            rows.append((e["name"], evaluate(formats.read_floorplan(e["gt"]),
                                             formats.read_floorplan(e["pred"]), cfg)))
        text = formats.batch_csv(rows)
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    report = evaluate(formats.read_floorplan(args.gt), formats.read_floorplan(args.pred), cfg)
    if args.out:
        formats.write_report(args.out, report)
    else:
        print(json.dumps(report.to_dict(), indent=2))
    return EXIT_OK


# render

def cmd_render(args) -> int:
    plan = formats.read_floorplan(args.plan)
    out = Path(args.out) if args.out else Path(args.plan).with_suffix(".svg")
    out.write_text(render_svg(plan))
    print(out)
    return EXIT_OK


# bench

def cmd_bench(args) -> int:
    threads = sorted({int(t) for t in str(args.threads).split(",")})
    spec = SceneSpec(n_rooms_min=args.max_rooms, n_rooms_max=args.max_rooms, rng_seed=args.seed,
                     points_per_wall_density=args.density)
    cloud, plan = generate_scene(spec)
    base = PipelineConfig(noise=NoiseSpec(args.noise_sigma, args.outlier_frac, args.seed),
                          room_dbscan=DbscanParams(args.eps_room), wall_dbscan=DbscanParams(args.eps_wall),
                          rng_seed=args.seed)
    rows = {}
    for t in threads:
        best = None
        for _ in range(args.repeat):
            t0 = time.perf_counter()
            res = reconstruct(cloud, replace(base, threads=t))
            wall = time.perf_counter() - t0
            if best is None or wall < best[0]:
                best = (wall, res)
        rows[t] = {"seconds": best[0], "rooms": len(best[1].plan),
                   "stages": {k: round(v, 6) for k, v in best[1].timings.items()}}
    report = {"gt_rooms": len(plan.rooms), "points": len(cloud), "cpus": os.cpu_count(), "threads": rows}
    if len(threads) > 1:
        report["speedup"] = rows[threads[0]]["seconds"] / rows[threads[-1]]["seconds"]
    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="planforge", description="Floorplan reconstruction from wall point clouds.")
    sub = p.add_subparsers(dest="command", required=True)

    def recon_flags(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--noise-sigma", type=float, default=0.0)
        sp.add_argument("--outlier-frac", type=float, default=0.0)
        sp.add_argument("--eps-room", type=float, default=0.05)
        sp.add_argument("--eps-wall", type=float, default=0.025)

    g = sub.add_parser("gen", help="generate synthetic scenes and a manifest")
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--max-rooms", type=int, default=10)
    g.add_argument("--out", default="scenes")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("reconstruct", help="reconstruct a floorplan from a scene file or manifest")
    r.add_argument("scene")
    r.add_argument("--votes", default="oracle", help="'oracle' or a votes JSON file")
    recon_flags(r)
    r.add_argument("--threads", type=int, default=1)
    r.add_argument("--svg")
    r.add_argument("--out")
    r.set_defaults(func=cmd_reconstruct)

    e = sub.add_parser("eval", help="score a prediction against a reference plan, or a whole manifest")
    e.add_argument("gt")
    e.add_argument("pred", nargs="?")
    e.add_argument("--grid", type=int, default=256)
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    v = sub.add_parser("render", help="draw a floorplan as SVG")
    v.add_argument("plan")
    v.add_argument("--out")
    v.set_defaults(func=cmd_render)

    b = sub.add_parser("bench", help="time reconstruction of a generated scene at several thread counts")
    b.add_argument("--max-rooms", type=int, default=10)
    b.add_argument("--threads", default="1,8", help="comma-separated thread counts")
    b.add_argument("--density", type=float, default=300.0)
    b.add_argument("--repeat", type=int, default=3)
    recon_flags(b)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        if isinstance(getattr(args, "threads", None), int) and args.threads < 1:
            raise InputError("--threads must be >= 1")
        return args.func(args)
    except (InputError, SceneParseError, VoteMismatch, BothEmpty, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InvariantViolation, PlanforgeError, AssertionError) as exc:
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
