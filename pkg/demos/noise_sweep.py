"""How the oracle-vote pipeline degrades as vote noise grows.

    python demos/noise_sweep.py [n_scenes]
"""
import sys

from planforge.errors import NoRoomsFound
from planforge.formats import gt_floorplan
from planforge.metrics import evaluate, mean_scores
from planforge.pipeline import PipelineConfig, reconstruct
from planforge.synthgen import SceneSpec, generate_scene
from planforge.votes import NoiseSpec

n = int(sys.argv[1]) if len(sys.argv) > 1 else 10
scenes = [generate_scene(SceneSpec(rng_seed=s)) for s in range(n)]

print(f"{'sigma':>6} {'outl':>5} | {'corner P':>8} {'corner R':>8} {'room P':>7} {'room R':>7}")
for sigma, outliers in [(0.0, 0.0), (0.01, 0.0), (0.02, 0.02), (0.04, 0.02), (0.06, 0.05)]:
    reports = []
    for s, (cloud, gt) in enumerate(scenes):
        cfg = PipelineConfig(noise=NoiseSpec(sigma, outliers, s), rng_seed=s)
        try:
            pred = reconstruct(cloud, cfg).plan
        except NoRoomsFound as exc:
            pred = exc.result.plan
        reports.append(evaluate(gt_floorplan(gt), pred))
    m = mean_scores(reports)
    print(f"{sigma:6.2f} {outliers:5.2f} | {m['corner_precision']:8.3f} {m['corner_recall']:8.3f} "
          f"{m['room_precision']:7.3f} {m['room_recall']:7.3f}")
