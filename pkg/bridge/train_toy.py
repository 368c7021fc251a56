"""Toy training loop over an augmented corpus and its manifest.

Demonstrates the consumer side of the augmentation pipeline: the manifest
is the source of truth for what exists (items, applied transforms), the
PNGs are normalized to [0, 1] tensors, and a small torch classifier is
fitted against synthetic labels (here: whether the item had at least as
many executed transforms as the corpus median, a quantity only the
manifest knows). Nothing here is meant to converge to anything useful;
the point is exercising the file contract end to end.

Run:  python bridge/train_toy.py --corpus DIR [--epochs 3] [--out report.json]
"""

import argparse
import json
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image


def load_corpus(corpus_dir: Path):
    manifest = json.loads((corpus_dir / "manifest.json").read_text())
    items = [it for it in manifest["items"] if "error" not in it]
    images = []
    counts = []
    for item in items:
        with Image.open(corpus_dir / item["output"]) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
        images.append(arr.transpose(2, 0, 1))
        counts.append(len(item["instances"]))
    x = torch.tensor(np.stack(images), dtype=torch.float32)
    median = float(np.median(counts))
    y = torch.tensor([int(c >= median) for c in counts], dtype=torch.long)
    return x, y, manifest


class TinyNet(torch.nn.Module):
    def __init__(self):
        super().__init__()
        self.conv = torch.nn.Conv2d(3, 4, 3)
        self.head = torch.nn.Linear(4, 2)

    def forward(self, x):
        a = F.relu(self.conv(x))
        return self.head(a.mean(dim=(2, 3)))


def train(corpus_dir, epochs=3, seed=0) -> dict:
    torch.manual_seed(seed)
    x, y, manifest = load_corpus(Path(corpus_dir))
    model = TinyNet()
    optim = torch.optim.SGD(model.parameters(), lr=0.05)
    losses = []
    for epoch in range(epochs):
        optim.zero_grad()
        loss = F.cross_entropy(model(x), y)
        loss.backward()
        optim.step()
        losses.append(float(loss.item()))
        print(f"epoch {epoch + 1}: loss {losses[-1]:.4f} over {len(x)} items")
    return {
        "corpus_item_count": len(x),
        "policy": manifest["policy"],
        "epochs": epochs,
        "losses": losses,
    }


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--corpus", required=True, help="augmented corpus directory")
    parser.add_argument("--epochs", type=int, default=3)
    parser.add_argument("--out", help="report JSON path")
    args = parser.parse_args()
    report = train(args.corpus, args.epochs)
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2) + "\n")


if __name__ == "__main__":
    main()
