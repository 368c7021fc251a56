"""Turn a raw volume into RGB slice images.

Builds a synthetic volume with a bright ellipsoid, writes it in the VOL1
raw format, reads it back, and extracts the sagittal slice stack (the
first and last 20 slices are discarded; each kept slice is min-max scaled
to 8 bits and replicated across R, G, B).

Run:  python demos/01_volume_to_slices.py
"""

from pathlib import Path

import numpy as np

from slicelab import volume_read, volume_to_slices, volume_write, image_write_png

out_dir = Path("demo_output/01_volume_to_slices")
out_dir.mkdir(parents=True, exist_ok=True)

# A 169-slice volume: smooth background plus an off-center ellipsoid.
sag, cor, ax = 169, 104, 90
zz, yy, xx = np.mgrid[0:sag, 0:cor, 0:ax].astype(np.float32)
vol = 40.0 + 30.0 * np.sin(zz / 19.0) * np.cos(yy / 13.0)
vol += 140.0 * ((((zz - 84) / 50) ** 2 + ((yy - 52) / 30) ** 2 + ((xx - 45) / 26) ** 2) < 1.0)

vol_path = out_dir / "volume.vol"
volume_write(vol, vol_path)
print(f"wrote {vol_path} ({vol_path.stat().st_size / 1e6:.1f} MB)")

slices = volume_to_slices(volume_read(vol_path))
print(f"extent {sag} -> {len(slices)} slices of shape {slices[0].shape}")

for index in (0, len(slices) // 2, len(slices) - 1):
    png = out_dir / f"slice_{index:03d}.png"
    image_write_png(slices[index], png)
    print(f"  {png}")
