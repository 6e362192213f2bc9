"""
Finding the foreground without labels
=====================================

A feature map is summed over channels, thresholded at its mean, reduced to
its largest 8-connected blob, and the blob's bounding box is mapped back to
pixels. The image is then cropped to that box and zoomed to full size.

Here the "feature extractor" is a parameter-free stand-in: the standard
deviation of each pixel patch. Textured regions light up and flat ones do not,
which is enough to watch every step.
"""
import sys
from pathlib import Path

import numpy as np

from bsfa.backbone import variance_features
from bsfa.bas import refine
from bsfa.harness.visualize import visualize_arrays
from bsfa.synthetic import blob_image

rng = np.random.default_rng(0)
x, (cy, cx) = blob_image(rng)
print("image", x.shape, "blob centre at", (round(cy, 1), round(cx, 1)))

F = variance_features(x)  # (3, 11, 11)
refined, est = refine(x, F)

# The activation map and the above-mean cells
print("threshold", round(est.threshold, 4))
print("mask\n", est.mask)

# Only the largest connected component survives
print("component\n", est.component_mask)
print("feature box", est.feature_box.as_tuple())
print("image box  ", est.image_box.as_tuple(), "contains centre:", est.image_box.contains(cy, cx))

# The refined image has the same size as the input
print("refined", refined.shape)

# The same steps as six PNG panels
out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/bas")
for r in visualize_arrays(variance_features, [x], ["blob"], out, with_erase=True):
    print("\n".join(r["files"]))
