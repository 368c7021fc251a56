"""Contact sheet of all 23 transforms at increasing magnitude.

Each row is one transform kind, each column one magnitude level (0, 10,
20, 30); parameterless kinds repeat their single effect. The sheet makes
the magnitude semantics easy to eyeball: level 0 is always the identity.

Run:  python demos/02_transform_gallery.py
"""

from pathlib import Path

import numpy as np

from slicelab import KINDS, Rng, apply_transform, realize, image_write_png

out_dir = Path("demo_output/02_transform_gallery")
out_dir.mkdir(parents=True, exist_ok=True)

# base tile: gradient + disk, so both photometric and geometric effects show
h, w = 72, 64
yy, xx = np.mgrid[0:h, 0:w]
tile = (90 + 120 * xx / w).astype(np.uint8)
tile[((yy - 30) ** 2 + (xx - 28) ** 2) < 160] = 220
img = np.stack([tile, np.roll(tile, 6, axis=1), 255 - tile], axis=2).astype(np.uint8)

levels = (0, 10, 20, 30)
rng = Rng.derive(2)
pad = 3
sheet = np.full(((h + pad) * len(KINDS) + pad, (w + pad) * len(levels) + pad, 3),
                255, dtype=np.uint8)
for row, kind in enumerate(KINDS):
    for col, level in enumerate(levels):
        t = realize(kind, level if kind.magnitude_range else 0, rng)
        cell = apply_transform(img, t)
        y = pad + row * (h + pad)
        x = pad + col * (w + pad)
        sheet[y:y + h, x:x + w] = cell
    print(f"{kind.name:16s} [{kind.category}]  range={kind.magnitude_range}")

path = out_dir / "gallery.png"
image_write_png(sheet, path)
print(f"\n23 kinds x {len(levels)} levels -> {path}")
