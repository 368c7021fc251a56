"""Command-line surface: reproducible experiment workflows over the
library, exchanging data through documented file formats only.

Subcommands: augment, split, aggregate, explain, gridsearch, bench,
earlystop.  Every run with the same seed and inputs produces byte-identical
outputs, independent of thread count.  Exit codes: 0 on success, 2 on
validation errors.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import aggregator, gradcampp, splitter
from .earlystop import DEFAULT_PATIENCE, run_early_stopping
from .policies import PolicyError, PolicySpec, grid_enumerate, sample_policy
from .rng import Rng
from .tensors import (
    image_read_png,
    image_write_png,
    tensor_write,
    volume_read,
    volume_to_slices,
)
from .transforms import apply_transform, random_crop, resize_bilinear
from PIL import Image

DEFAULT_RESIZE = (297, 256)   # height, width
DEFAULT_CROP = 224


class CliError(Exception):
    """Input validation failure; reported on stderr with exit code 2."""


def _load_policy(text: str) -> PolicySpec:
    path = Path(text)
    try:
        raw = path.read_text() if path.suffix == ".json" and path.exists() else text
        return PolicySpec.from_json(json.loads(raw))
    except (json.JSONDecodeError, PolicyError, TypeError) as exc:
        raise CliError(f"bad policy {text!r}: {exc}") from exc


def _write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# augment


def _encode_png(img: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(img, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def _corpus_files(input_dir: Path) -> list[Path]:
    if not input_dir.is_dir():
        raise CliError(f"input directory {input_dir} does not exist")
    files = sorted(
        p for p in input_dir.iterdir() if p.suffix.lower() in (".png", ".vol")
    )
    if not files:
        raise CliError(f"no .png or .vol inputs under {input_dir}")
    return files


def _augment_one(img, seed, file_index, slice_index, spec, resize_hw, crop_size):
    """The per-item pipeline: resize -> policy augment -> random crop.

    The item's rng stream is derived from (seed, file_index, slice_index)
    and consumed in a fixed order (policy draws, then crop offsets), so
    results do not depend on processing order or thread count.
    """
    rng = Rng.derive(seed, stream_id=file_index, item_index=slice_index)
    out = resize_bilinear(img, *resize_hw)
    instances = sample_policy(spec, rng)
    for t in instances:
        out = apply_transform(out, t)
    out, offset = random_crop(out, crop_size, rng)
    return out, instances, offset


def _iter_items(files: list[Path]):
    """Yield (file_index, slice_index, input_name, image) over the corpus,
    expanding VOL1 volumes into their slices."""
    for fi, path in enumerate(files):
        if path.suffix.lower() == ".vol":
            for si, img in enumerate(volume_to_slices(volume_read(path))):
                yield fi, si, path.name, img
        else:
            yield fi, 0, path.name, image_read_png(path)


def cmd_augment(args) -> int:
    cfg = _merged_config(args, {
        "input": None, "output": None, "policy": None, "seed": 0,
        "threads": 1, "resize_h": DEFAULT_RESIZE[0],
        "resize_w": DEFAULT_RESIZE[1], "crop": DEFAULT_CROP,
    })
    for key in ("input", "output", "policy"):
        if cfg[key] is None:
            raise CliError(f"augment requires --{key}")
    spec = cfg["policy"] if isinstance(cfg["policy"], PolicySpec) else _load_policy(
        cfg["policy"] if isinstance(cfg["policy"], str) else json.dumps(cfg["policy"]))
    if cfg["resize_h"] < cfg["crop"] or cfg["resize_w"] < cfg["crop"]:
        raise CliError(
            f"resize {cfg['resize_h']}x{cfg['resize_w']} is smaller than crop {cfg['crop']}"
        )
    in_dir = Path(cfg["input"])
    out_dir = Path(cfg["output"])
    out_dir.mkdir(parents=True, exist_ok=True)
    files = _corpus_files(in_dir)

    entries: list[dict] = []
    failures = 0
    work: list[tuple[int, int, str, np.ndarray]] = []
    for fi, path in enumerate(files):
        try:
            if path.suffix.lower() == ".vol":
                for si, img in enumerate(volume_to_slices(volume_read(path))):
                    work.append((fi, si, path.name, img))
            else:
                work.append((fi, 0, path.name, image_read_png(path)))
        except Exception as exc:
            entries.append({"input": path.name, "error": str(exc)})
            failures += 1

    def run(item):
        fi, si, name, img = item
        out, instances, offset = _augment_one(
            img, cfg["seed"], fi, si, spec,
            (cfg["resize_h"], cfg["resize_w"]), cfg["crop"])
        stem = Path(name).stem
        out_name = f"{stem}_slice{si:03d}.png" if name.endswith(".vol") else f"{stem}.png"
        return {
            "input": name,
            "output": out_name,
            "stream": [fi, si],
            "instances": [t.to_json() for t in instances],
            "crop_offset": list(offset),
        }, out_name, _encode_png(out)

    max_workers = max(1, int(cfg["threads"]))
    if max_workers == 1:
        results = [run(item) for item in work]
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(run, work))

    for entry, out_name, png in results:
        (out_dir / out_name).write_bytes(png)
        entries.append(entry)
    entries.sort(key=lambda e: (e["input"], e.get("output", "")))

    manifest = {
        "seed": cfg["seed"],
        "policy": spec.to_json(),
        "resize": [cfg["resize_h"], cfg["resize_w"]],
        "crop": cfg["crop"],
        "items": entries,
    }
    _write_json(manifest, out_dir / "manifest.json")
    print(f"augmented {len(results)} items from {len(files)} files -> {out_dir}")
    if failures:
        print(f"{failures} items failed; see manifest", file=sys.stderr)
        return 2
    return 0


def _merged_config(args, defaults: dict) -> dict:
    """Defaults, overlaid by a --config JSON file, overlaid by CLI flags."""
    cfg = dict(defaults)
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            loaded = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"bad config file {config_path}: {exc}") from exc
        unknown = set(loaded) - set(defaults)
        if unknown:
            raise CliError(f"unknown config keys {sorted(unknown)}")
        cfg.update(loaded)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


# ---------------------------------------------------------------------------
# split / aggregate / explain


def cmd_split(args) -> int:
    try:
        roster = splitter.read_roster_csv(args.roster)
        result = splitter.split_subjects(roster, seed=args.seed,
                                         max_retries=args.max_retries)
    except (OSError, ValueError) as exc:
        raise CliError(str(exc)) from exc
    splitter.write_split_json(result, args.output)
    sizes = f"{len(result.train)}/{len(result.val)}/{len(result.test)}"
    flag = " (warning: balance not reached)" if result.warning else ""
    print(f"split {sizes} in {result.attempts} attempt(s){flag} -> {args.output}")
    return 0


def cmd_aggregate(args) -> int:
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        val_preds = aggregator.read_predictions_csv(args.val)
        test_preds = aggregator.read_predictions_csv(args.test)
        weights = aggregator.fit_weights(val_preds, args.slices_per_subject)
        decisions = aggregator.decide_subjects(test_preds, weights)
        report = aggregator.metrics(decisions)
    except (OSError, ValueError) as exc:
        raise CliError(str(exc)) from exc
    aggregator.write_weights_json(weights, out_dir / "weights.json")
    _write_json(
        [
            {"subject_id": d.subject_id, "score0": d.scores[0],
             "score1": d.scores[1], "predicted": d.predicted, "label": d.label}
            for d in decisions
        ],
        out_dir / "decisions.json",
    )
    _write_json(report.to_json(), out_dir / "metrics.json")
    print(f"aggregated {len(decisions)} subjects; accuracy {report.accuracy:.4f} -> {out_dir}")
    return 0


def cmd_explain(args) -> int:
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        bundle = gradcampp.load_bundle(args.bundle)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise CliError(f"bad bundle {args.bundle}: {exc}") from exc
    heat = gradcampp.heatmap(bundle)
    tensor_write(heat.values.astype(np.float32), out_dir / "heatmap.tsr")
    if args.base_image:
        try:
            base = image_read_png(args.base_image)
        except (OSError, ValueError) as exc:
            raise CliError(f"bad base image {args.base_image}: {exc}") from exc
        overlay = gradcampp.render_overlay(base, heat, args.alpha_blend)
        image_write_png(overlay, out_dir / "overlay.png")
    print(f"heatmap for class {bundle.class_index} -> {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# gridsearch


def _config_id(variant: str, index: int) -> str:
    return f"{variant}-{index:03d}"


def cmd_gridsearch(args) -> int:
    out_dir = Path(args.output_dir)
    configs_dir = out_dir / "configs"
    configs_dir.mkdir(parents=True, exist_ok=True)
    try:
        grid = grid_enumerate(args.variant)
    except PolicyError as exc:
        raise CliError(str(exc)) from exc
    ids = []
    for i, spec in enumerate(grid):
        cid = _config_id(args.variant, i)
        ids.append(cid)
        _write_json({"id": cid, "policy": spec.to_json()}, configs_dir / f"{cid}.json")
    _write_json({"variant": args.variant, "config_ids": ids},
                out_dir / "grid_manifest.json")
    print(f"emitted {len(ids)} {args.variant} configs -> {configs_dir}")

    if not args.metrics:
        return 0
    rows = _read_metric_rows(args.metrics)
    seen: dict[str, float] = {}
    for row in rows:
        cid = row["config_id"]
        if row["split"] != "val":
            raise CliError(
                f"selection must use validation metrics only; got split "
                f"{row['split']!r} for {cid}"
            )
        if cid not in set(ids):
            raise CliError(f"unknown config id {cid!r}")
        if cid in seen:
            raise CliError(f"duplicate config id {cid!r}")
        seen[cid] = float(row["accuracy"])
    missing = [cid for cid in ids if cid not in seen]
    if missing:
        raise CliError(f"missing metrics for {len(missing)} configs, e.g. {missing[:3]}")
    ranked = sorted(seen.items(), key=lambda kv: (-kv[1], kv[0]))
    table = [
        {"rank": i + 1, "config_id": cid, "val_accuracy": acc,
         "winner": i == 0}
        for i, (cid, acc) in enumerate(ranked)
    ]
    _write_json({"variant": args.variant, "ranked": table,
                 "winner": table[0]["config_id"]}, out_dir / "ranked.json")
    print(f"winner: {table[0]['config_id']} (val accuracy {table[0]['val_accuracy']:.4f})")
    return 0


def _read_metric_rows(path) -> list[dict]:
    expected = ["config_id", "split", "accuracy"]
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != expected:
                raise CliError(
                    f"metrics CSV must have header {expected}, got {reader.fieldnames}"
                )
            return list(reader)
    except OSError as exc:
        raise CliError(f"cannot read metrics {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# bench


def cmd_bench(args) -> int:
    spec = _load_policy(args.policy)
    files = _corpus_files(Path(args.input))
    items = list(_iter_items(files))
    thread_counts = _parse_threads(args.threads)
    resize_hw = DEFAULT_RESIZE
    crop = DEFAULT_CROP

    # Per-kind timing breakdown, measured on a dedicated single-thread pass.
    kind_seconds: dict[str, float] = {}
    kind_counts: dict[str, int] = {}
    for fi, si, _name, img in items:
        rng = Rng.derive(args.seed, stream_id=fi, item_index=si)
        out = resize_bilinear(img, *resize_hw)
        for t in sample_policy(spec, rng):
            start = time.perf_counter()
            out = apply_transform(out, t)
            kind_seconds[t.kind] = kind_seconds.get(t.kind, 0.0) + time.perf_counter() - start
            kind_counts[t.kind] = kind_counts.get(t.kind, 0) + 1
        random_crop(out, crop, rng)

    def run_pass(workers: int) -> tuple[float, str]:
        digest = hashlib.sha256()
        start = time.perf_counter()

        def one(item):
            fi, si, _name, img = item
            out, instances, offset = _augment_one(
                img, args.seed, fi, si, spec, resize_hw, crop)
            return out.tobytes(), json.dumps(
                [t.to_json() for t in instances]).encode(), offset

        if workers == 1:
            results = [one(item) for item in items]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(one, items))
        elapsed = time.perf_counter() - start
        for out_bytes, inst_bytes, offset in results:
            digest.update(out_bytes)
            digest.update(inst_bytes)
            digest.update(repr(offset).encode())
        return elapsed, digest.hexdigest()

    passes = {}
    digests = set()
    for workers in thread_counts:
        elapsed, digest = run_pass(workers)
        passes[str(workers)] = {
            "seconds": elapsed,
            "images_per_second": len(items) / elapsed if elapsed > 0 else None,
        }
        digests.add(digest)

    report = {
        "images": len(items),
        "policy": spec.to_json(),
        "seed": args.seed,
        "thread_counts": passes,
        "per_kind": {
            kind: {"seconds": kind_seconds[kind], "applications": kind_counts[kind]}
            for kind in sorted(kind_seconds)
        },
        "outputs_identical": len(digests) == 1,
        "output_digest": sorted(digests)[0],
    }
    if args.output:
        _write_json(report, args.output)
    else:
        json.dump(report, sys.stdout, indent=2, sort_keys=True)
        print()
    if len(digests) != 1:
        print("outputs differ across thread counts", file=sys.stderr)
        return 2
    return 0


def _parse_threads(text: str) -> list[int]:
    try:
        counts = [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise CliError(f"bad --threads value {text!r}") from exc
    if not counts or any(c < 1 for c in counts):
        raise CliError(f"thread counts must be positive, got {text!r}")
    return counts


# ---------------------------------------------------------------------------
# earlystop


def cmd_earlystop(args) -> int:
    try:
        lines = Path(args.metrics).read_text().split()
        values = [float(x) for x in lines]
    except (OSError, ValueError) as exc:
        raise CliError(f"bad metrics file {args.metrics}: {exc}") from exc
    if not values:
        raise CliError("metrics file is empty")
    result = run_early_stopping(values, patience=args.patience)
    if args.output:
        _write_json(result, args.output)
    else:
        json.dump(result, sys.stdout, indent=2, sort_keys=True)
        print()
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slicelab",
        description="Deterministic augmentation, splitting, voting, and heatmap workflows.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("augment", help="augment a corpus of PNG/VOL1 files")
    p.add_argument("--input", help="directory of .png / .vol inputs")
    p.add_argument("--output", help="output directory")
    p.add_argument("--policy", help="policy JSON string or file")
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--resize-h", dest="resize_h", type=int, default=None)
    p.add_argument("--resize-w", dest="resize_w", type=int, default=None)
    p.add_argument("--crop", type=int, default=None)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("split", help="subject-level 6:2:2 split of a roster CSV")
    p.add_argument("--roster", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-retries", type=int, default=splitter.DEFAULT_MAX_RETRIES)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("aggregate", help="fit slice weights on val, vote and score test")
    p.add_argument("--val", required=True, help="validation prediction CSV")
    p.add_argument("--test", required=True, help="test prediction CSV")
    p.add_argument("--slices-per-subject", dest="slices_per_subject",
                   type=int, default=129)
    p.add_argument("--output-dir", dest="output_dir", required=True)
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("explain", help="heatmap (+ overlay) from a bundle directory")
    p.add_argument("--bundle", required=True, help="directory with A.tsr, G.tsr, meta.json")
    p.add_argument("--base-image", dest="base_image", help="PNG to overlay")
    p.add_argument("--alpha-blend", dest="alpha_blend", type=float, default=0.5)
    p.add_argument("--output-dir", dest="output_dir", required=True)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("gridsearch", help="emit a policy grid; optionally rank by val metrics")
    p.add_argument("--variant", required=True, choices=["RA", "RA23", "RRA23", "TRRA"])
    p.add_argument("--output-dir", dest="output_dir", required=True)
    p.add_argument("--metrics", help="CSV config_id,split,accuracy (val rows only)")
    p.set_defaults(func=cmd_gridsearch)

    p = sub.add_parser("bench", help="throughput benchmark with determinism check")
    p.add_argument("--input", required=True)
    p.add_argument("--policy", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", default="1,2", help="comma-separated thread counts")
    p.add_argument("--output", help="report JSON path (default stdout)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("earlystop", help="apply the patience rule to a metric sequence")
    p.add_argument("--metrics", required=True, help="text file, one metric per line")
    p.add_argument("--patience", type=int, default=DEFAULT_PATIENCE)
    p.add_argument("--output", help="result JSON path (default stdout)")
    p.set_defaults(func=cmd_earlystop)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
