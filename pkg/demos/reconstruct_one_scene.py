"""Generate one synthetic apartment, reconstruct it from oracle votes, score it, draw it.

    python demos/reconstruct_one_scene.py [seed] [out_dir]
"""
import sys
from pathlib import Path

from planforge.formats import gt_floorplan
from planforge.metrics import evaluate
from planforge.pipeline import PipelineConfig, reconstruct
from planforge.render import render_svg
from planforge.synthgen import SceneSpec, generate_scene

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 4
out = Path(sys.argv[2] if len(sys.argv) > 2 else "demo_out")
out.mkdir(exist_ok=True)

cloud, gt = generate_scene(SceneSpec(rng_seed=seed))
print(f"scene {seed}: {len(gt.rooms)} rooms, {len(cloud)} wall points")

res = reconstruct(cloud, PipelineConfig(rng_seed=seed))
print(f"reconstructed {len(res.plan)} rooms in {res.total_seconds:.3f} s")
for stage, sec in res.timings.items():
    print(f"  {stage:<10} {sec * 1000:7.1f} ms")

for k, poly in res.plan.rooms:
    print(f"  room {k}: {len(poly.corners)} corners, area {poly.area:.3f}")

report = evaluate(gt_floorplan(gt), res.plan)
for name, value in report.scores().items():
    print(f"  {name:<17} {value:.3f}")

(out / f"scene_{seed}_gt.svg").write_text(render_svg(gt_floorplan(gt)))
(out / f"scene_{seed}_pred.svg").write_text(render_svg(res.plan))
print(f"svgs written to {out}/")
