"""Independently recompute a Grad-CAM++ heatmap and diff it against the
primary implementation's output file.

The recomputation here is written from the documented conventions alone
(position weights G^2 / (2 G^2 + sum(A) G^3 + 1e-8), zero where G = 0;
channel weights sum alpha * relu(G); heatmap relu(sum w_k A_k) scaled to
peak 1) and shares no code with the main package. The report also checks
that a tensor written by this side round-trips bit-exactly, and counts the
items of an augmented corpus manifest when one is supplied.

Run:  python bridge/verify_heatmap.py --bundle DIR --heatmap heatmap.tsr
      [--corpus manifest.json] [--out report.json]
"""

import argparse
import json
import tempfile
from pathlib import Path

import numpy as np

from tsrio import read_tsr, write_tsr

EPS = 1e-8


def recompute_heatmap(bundle_dir: Path) -> np.ndarray:
    a = read_tsr(bundle_dir / "A.tsr").astype(np.float64)
    g = read_tsr(bundle_dir / "G.tsr").astype(np.float64)
    if a.shape != g.shape or a.ndim != 3:
        raise ValueError(f"bundle arrays disagree: A {a.shape}, G {g.shape}")
    a_sum = a.sum(axis=(1, 2), keepdims=True)
    denom = 2.0 * g * g + a_sum * g * g * g + EPS
    alpha = np.where(g != 0.0, g * g / denom, 0.0)
    weights = (alpha * np.maximum(g, 0.0)).sum(axis=(1, 2))
    raw = np.maximum(np.einsum("k,kij->ij", weights, a), 0.0)
    peak = raw.max()
    return raw / peak if peak > 0.0 else raw


def roundtrip_ok(arr: np.ndarray) -> bool:
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "roundtrip.tsr"
        write_tsr(arr.astype(np.float32), path)
        back = read_tsr(path)
        return back.tobytes() == arr.astype(np.float32).tobytes()


def verify(bundle_dir, heatmap_path, corpus_manifest=None) -> dict:
    bundle_dir = Path(bundle_dir)
    ours = recompute_heatmap(bundle_dir)
    theirs = read_tsr(heatmap_path).astype(np.float64)
    if theirs.shape != ours.shape:
        raise ValueError(
            f"heatmap shapes disagree: {theirs.shape} vs {ours.shape}")
    report = {
        "max_abs_heatmap_discrepancy": float(np.abs(ours - theirs).max()),
        "tensor_roundtrip_ok": roundtrip_ok(ours),
        "corpus_item_count": None,
    }
    if corpus_manifest is not None:
        manifest = json.loads(Path(corpus_manifest).read_text())
        report["corpus_item_count"] = len(manifest["items"])
    return report


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--bundle", required=True, help="bundle directory")
    parser.add_argument("--heatmap", required=True, help="primary heatmap TSR1 file")
    parser.add_argument("--corpus", help="augmented-corpus manifest.json to count")
    parser.add_argument("--out", help="report JSON path (default stdout)")
    args = parser.parse_args()
    report = verify(args.bundle, args.heatmap, args.corpus)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")


if __name__ == "__main__":
    main()
