"""Precision/recall evaluation of detections against annotations.

Run from the repository root:  python3 demos/06_evaluation.py
"""

import numpy as np

from maskdet import EvalCounts, match_for_eval, precision_recall
from maskdet.anchors import FACE, MASK
from maskdet.postproc import Detection

# One image: two faces and a mask in the ground truth.
gt_labels = np.array([FACE, FACE, MASK])
gt_boxes = np.array([[10, 10, 50, 50],
                     [100, 100, 160, 160],
                     [200, 200, 260, 260.0]])

# The detector found one face spot-on, hallucinated another face, and
# called the mask a face too.
detections = [
    Detection(np.array([12.0, 11, 51, 50]), FACE, 0.95),   # good match
    Detection(np.array([300.0, 300, 340, 340]), FACE, 0.80),  # spurious
    Detection(np.array([200.0, 200, 260, 260]), FACE, 0.70),  # wrong class
]

counts = match_for_eval(detections, gt_labels, gt_boxes, iou_thresh=0.5)
print("face counts: TP=%d FP=%d FN=%d" % (counts.face.tp, counts.face.fp,
                                          counts.face.fn))
print("mask counts: TP=%d FP=%d FN=%d" % (counts.mask.tp, counts.mask.fp,
                                          counts.mask.fn))

metrics = precision_recall(counts)
for label, name in ((FACE, "face"), (MASK, "mask")):
    precision, recall = metrics[label]
    print(f"{name}: precision={precision:.3f} recall={recall:.3f}")

# Counts from many images sum before the ratios (the dataset-level metric).
total = counts + match_for_eval([], np.array([FACE]),
                                np.array([[0, 0, 30, 30.0]]))
print("\nafter a second image with one missed face:",
      "recall ->", round(precision_recall(total)[FACE][1], 3))
