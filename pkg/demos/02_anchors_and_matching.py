"""Default anchors, box offset coding and ground-truth assignment.

Run from the repository root:  python3 demos/02_anchors_and_matching.py
"""

import numpy as np

from maskdet import ModelConfig, decode, encode, generate_anchors, iou, match_targets
from maskdet.anchors import FACE, MASK

config = ModelConfig(input_size=640)
anchors = generate_anchors(config)
print(f"{len(anchors)} anchors at input size {config.input_size}")
for layout in anchors.layout:
    print(f"  stride {layout.stride:>2}: {layout.grid_h}x{layout.grid_w} cells,"
          f" {layout.anchors_per_cell} anchors each -> {layout.count}")

# Anchors are square, centered on their grid cell, with sides 2x and 4x the
# stride.  The very first one sits at (4, 4) with side 16:
print("first two anchors (cx, cy, w, h):")
print(anchors.anchors[:2])

# Offsets encode a ground-truth box relative to an anchor (SSD-style, with
# variances 0.1/0.2); decode inverts the transform exactly.
gt = np.array([100.0, 120.0, 180.0, 220.0])
anchor = np.array([150.0, 160.0, 64.0, 64.0])
offsets = encode(gt, anchor)
print("\nencode(gt, anchor) ->", np.round(offsets, 4))
print("decode round trip  ->", decode(offsets, anchor))

# Target assignment labels every anchor: a ground truth first claims its
# best-IoU anchor, then any anchor overlapping a gt at IoU >= 0.35 turns
# positive too.  Everything else is background (label 0).
gt_boxes = np.array([[96.0, 96.0, 160.0, 160.0],     # a face
                     [400.0, 400.0, 520.0, 520.0]])  # a masked face
gt_labels = np.array([FACE, MASK])
result = match_targets(anchors, gt_boxes, gt_labels)
positive = np.flatnonzero(result.labels != 0)
print(f"\n{positive.size} positive anchors out of {len(anchors)}")
for row in positive[:5]:
    print(f"  anchor {row}: label {result.labels[row]}, "
          f"targets {np.round(result.loc_targets[row], 3)}")

best = positive[0]
print("IoU of first positive anchor vs its gt:",
      round(iou(anchors.corners()[best], gt_boxes[0]), 3))
