"""Grad-CAM++ heatmap on the reference network.

Builds a seeded reference net, runs it on an image with a bright blob,
computes the position weights, channel weights and heatmap, and renders
the colormapped overlay next to the plain Grad-CAM baseline for
comparison.

Run:  python demos/06_gradcampp_heatmap.py
"""

from pathlib import Path

import numpy as np

from slicelab import (
    gradcam_baseline,
    heatmap,
    image_write_png,
    init_params,
    make_bundle,
    render_overlay,
)
from slicelab.gradcampp import threshold_boundary
from slicelab.tensors import image_to_tensor

out_dir = Path("demo_output/06_gradcampp")
out_dir.mkdir(parents=True, exist_ok=True)

h, w = 96, 96
yy, xx = np.mgrid[0:h, 0:w]
gray = np.full((h, w), 70.0)
gray += 130.0 * (((yy - 34) ** 2 + (xx - 60) ** 2) < 230)
base = np.repeat(np.clip(gray, 0, 255).astype(np.uint8)[:, :, None], 3, axis=2)

params = init_params(channels=4, seed=11)
bundle = make_bundle(params, image_to_tensor(base))
print(f"predicted class {bundle.class_index}, score {bundle.score:+.4f}")

for name, heat in (("gradcampp", heatmap(bundle)),
                   ("gradcam_baseline", gradcam_baseline(bundle))):
    overlay = render_overlay(base, heat, alpha_blend=0.5)
    path = out_dir / f"{name}_overlay.png"
    image_write_png(overlay, path)
    hot = threshold_boundary(heat, 0.75).sum()
    print(f"{name:17s} peak={heat.values.max():.2f} boundary_pixels={hot} -> {path}")
