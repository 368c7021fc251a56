"""Write reference-net parameter/input/bundle/heatmap fixtures to disk.

For each index i in [0, count) this produces, under <out>/bundle_<i>/:

    params/            reference-net parameters (TSR1 files + meta.json)
    input.tsr          (3, H, W) input tensor
    A.tsr, G.tsr       feature maps and score gradients
    meta.json          {score_s, class_index}
    heatmap.tsr        the max-normalized Grad-CAM++ heatmap

Parameters and inputs are round-tripped through their float32 file form
before the forward/backward pass, so an external reimplementation reading
the same files sees bit-identical inputs. Used by the bridge cross-checks.

Run:  python demos/make_refnet_bundles.py --out DIR [--count 20] [--seed 7]
"""

import argparse
import json
from pathlib import Path

import numpy as np

from slicelab.gradcampp import heatmap, load_bundle, save_bundle
from slicelab.refnet import init_params, load_params, make_bundle, save_params
from slicelab.rng import Rng
from slicelab.tensors import tensor_read, tensor_write


def build_one(directory: Path, index: int, seed: int) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    rng = Rng.derive(seed, stream_id=index)
    channels = 1 + rng.randint(0, 3)
    params = init_params(channels, seed=rng.next_u64())
    save_params(params, directory / "params")
    params = load_params(directory / "params")

    h = 6 + rng.randint(0, 6)
    w = 6 + rng.randint(0, 6)
    x = np.array([[[rng.random() for _ in range(w)] for _ in range(h)]
                  for _ in range(3)])
    tensor_write(x.astype(np.float32), directory / "input.tsr")
    x = tensor_read(directory / "input.tsr").astype(np.float64)

    save_bundle(make_bundle(params, x), directory)
    bundle = load_bundle(directory)
    tensor_write(heatmap(bundle).values.astype(np.float32),
                 directory / "heatmap.tsr")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", required=True)
    parser.add_argument("--count", type=int, default=20)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()
    out = Path(args.out)
    for i in range(args.count):
        build_one(out / f"bundle_{i:02d}", i, args.seed)
    print(f"wrote {args.count} fixtures under {out}")


if __name__ == "__main__":
    main()
