"""The multibox training objective, computed forward on a synthetic scene.

Run from the repository root:  python3 demos/04_multibox_loss.py
"""

import math

import numpy as np

from maskdet import ModelConfig, Predictions, generate_anchors, match_targets, multibox_loss
from maskdet.anchors import FACE, MASK, MatchResult

config = ModelConfig(input_size=640)
anchors = generate_anchors(config)

gt_boxes = np.array([[100.0, 100.0, 160.0, 160.0],
                     [300.0, 300.0, 420.0, 420.0]])
gt_labels = np.array([FACE, MASK])
targets = match_targets(anchors, gt_boxes, gt_labels)
n_pos = int((targets.labels != 0).sum())
print(f"{n_pos} positive anchors for {len(gt_boxes)} ground truths")

rng = np.random.default_rng(1)
p = len(anchors)

# Start from awful predictions: random offsets, random logits.
bad = Predictions(rng.standard_normal((p, 4)).astype(np.float32),
                  rng.standard_normal((p, 3)).astype(np.float32))
out = multibox_loss(bad, targets)
print(f"\nrandom predictions: total={out.total:.3f} "
      f"(conf+={out.l_conf_pos:.2f}, conf-={out.l_conf_neg:.2f}, "
      f"loc={out.l_loc:.2f}, N={out.normalizer}, mined={out.n_neg})")

# Perfect predictions: exact offsets, saturated logits -> loss collapses.
loc = np.array(targets.loc_targets, dtype=np.float32)
cls = np.zeros((p, 3), dtype=np.float32)
cls[np.arange(p), targets.labels] = 40.0
perfect = multibox_loss(Predictions(loc, cls), targets)
print(f"perfect predictions: total={perfect.total:.2e}")

# The hand-checkable three-anchor case: one perfect positive plus two
# uniform-logit negatives mined at ratio 3 gives exactly 2*ln(3).
mini_pred = Predictions(np.zeros((3, 4), dtype=np.float32),
                        np.array([[0, 50, 0], [0, 0, 0], [0, 0, 0]],
                                 dtype=np.float32))
mini_targets = MatchResult(np.zeros((3, 4)), np.array([1, 0, 0]))
mini = multibox_loss(mini_pred, mini_targets)
print(f"\nthree-anchor fixture: total={mini.total:.6f} "
      f"(2*ln3={2 * math.log(3):.6f})")
