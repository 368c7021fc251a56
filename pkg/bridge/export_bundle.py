"""Export a feature-map/gradient bundle from a torch model.

Rebuilds the reference network (3x3 valid conv -> relu -> global average
pool -> 2-way linear head) in PyTorch from a parameter directory of TSR1
files, runs it on an input tensor, and uses autograd to take the gradient
of the chosen class score with respect to the post-relu feature maps. The
resulting A.tsr / G.tsr / meta.json directory matches the bundle layout
the heatmap tooling consumes.

Run:  python bridge/export_bundle.py --params DIR --input input.tsr --out DIR
      [--class-index {0,1}]   (default: argmax score)
"""

import argparse
import json
from pathlib import Path

import torch
import torch.nn.functional as F

from tsrio import read_tsr, write_tsr


def load_torch_params(params_dir: Path) -> dict:
    return {
        "kernels": torch.tensor(read_tsr(params_dir / "kernels.tsr"), dtype=torch.float64),
        "conv_bias": torch.tensor(read_tsr(params_dir / "conv_bias.tsr"), dtype=torch.float64),
        "head_weight": torch.tensor(read_tsr(params_dir / "head_weight.tsr"), dtype=torch.float64),
        "head_bias": torch.tensor(read_tsr(params_dir / "head_bias.tsr"), dtype=torch.float64),
    }


def export_bundle(params_dir, input_path, out_dir, class_index=None) -> dict:
    params = load_torch_params(Path(params_dir))
    x = torch.tensor(read_tsr(input_path), dtype=torch.float64)
    if x.dim() != 3 or x.shape[0] != 3:
        raise ValueError(f"input must be (3, H, W), got {tuple(x.shape)}")

    pre = F.conv2d(x.unsqueeze(0), params["kernels"], params["conv_bias"]).squeeze(0)
    feature_maps = F.relu(pre)
    feature_maps.requires_grad_(True)
    pooled = feature_maps.mean(dim=(1, 2))
    scores = params["head_weight"] @ pooled + params["head_bias"]
    if class_index is None:
        class_index = int(torch.argmax(scores).item())
    scores[class_index].backward()
    grads = feature_maps.grad

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_tsr(feature_maps.detach().numpy(), out / "A.tsr")
    write_tsr(grads.numpy(), out / "G.tsr")
    meta = {"score_s": float(scores[class_index].item()), "class_index": class_index}
    with open(out / "meta.json", "w") as fh:
        json.dump(meta, fh)
        fh.write("\n")
    return meta


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--params", required=True, help="parameter directory (TSR1 files)")
    parser.add_argument("--input", required=True, help="(3, H, W) input tensor, TSR1")
    parser.add_argument("--out", required=True, help="bundle output directory")
    parser.add_argument("--class-index", type=int, choices=(0, 1), default=None)
    args = parser.parse_args()
    meta = export_bundle(args.params, args.input, args.out, args.class_index)
    print(f"exported bundle for class {meta['class_index']} "
          f"(score {meta['score_s']:+.6f}) -> {args.out}")


if __name__ == "__main__":
    main()
