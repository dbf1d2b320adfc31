"""The order-free room vote loss on a tiny batch, with a few gradient steps.

    python demos/vote_loss.py
"""
import numpy as np

from planforge.votes import VoteOffsets, compute_vote_loss, vote_loss_gradient

rng = np.random.default_rng(0)
gt = rng.normal(0, 1, (3, 8, 3))
# predictions start close to the truth but with the two room votes swapped on half the seeds
pred = gt + rng.normal(0, 0.3, gt.shape)
pred[:2, ::2] = pred[[1, 0], ::2]

target = VoteOffsets.from_array(gt)
print("swapped pairs cost nothing extra:")
print("  loss", compute_vote_loss(VoteOffsets.from_array(pred), target))

lr = 0.05
for step in range(1, 201):
    g = vote_loss_gradient(VoteOffsets.from_array(pred), target).as_array()
    pred -= lr * g
    if step in (1, 10, 50, 200):
        total, room, wall = compute_vote_loss(VoteOffsets.from_array(pred), target)
        print(f"  step {step:3d}: total {total:.4f} room {room:.4f} wall {wall:.4f}")
