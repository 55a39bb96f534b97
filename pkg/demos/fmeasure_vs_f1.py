"""Why the weighted F-measure and plain pixel F1 disagree.

Both scores see the same number of wrong pixels below, but the weighted
measure charges less for a false positive hugging the true region than for
one far away, and it counts a hole in the middle of the region differently
from a chipped edge.

    python3 demos/fmeasure_vs_f1.py
"""

import numpy as np

from latent_affordance.metrics import pixel_f1, weighted_fbeta

gt = np.zeros((40, 40))
gt[10:30, 10:30] = 1

cases = {"perfect": gt.copy()}
near = gt.copy()
near[10:30, 30:32] = 1
cases["40 extra pixels touching the region"] = near
far = gt.copy()
far[0:20, 38:40] = 1
cases["40 extra pixels far away"] = far
hole = gt.copy()
hole[18:22, 15:25] = 0
cases["40 pixels missing from the middle"] = hole
edge = gt.copy()
edge[10:30, 10:12] = 0
cases["40 pixels shaved off an edge"] = edge

for name, pred in cases.items():
    print(f"{name:38s} F1 {pixel_f1(pred, gt):.3f}   weighted F {weighted_fbeta(pred, gt):.3f}")
