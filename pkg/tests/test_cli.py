import json
from pathlib import Path

import numpy as np
import pytest

from slicelab.aggregator import SlicePrediction, write_predictions_csv
from slicelab.cli import main
from slicelab.gradcampp import save_bundle
from slicelab.refnet import init_params, make_bundle
from slicelab.tensors import (
    image_read_png,
    image_write_png,
    tensor_read,
    volume_write,
)
from slicelab.transforms import resize_bilinear
from tests.conftest import random_image

TRRA_JSON = '{"variant": "TRRA", "n_color": 5, "n_shape": 2, "m_lo": 5, "m_hi": 30, "p": 0.9}'


def make_corpus(path: Path, count: int, np_rng, h=64, w=56) -> None:
    path.mkdir(parents=True, exist_ok=True)
    for i in range(count):
        image_write_png(random_image(np_rng, h, w), path / f"img{i:03d}.png")


def read_tree(path: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


# ---------------------------------------------------------------------------
# augment


def test_augment_deterministic_across_runs_and_threads(tmp_path, np_rng):
    corpus = tmp_path / "corpus"
    make_corpus(corpus, 6, np_rng, h=80, w=72)
    args = ["augment", "--input", str(corpus), "--policy", TRRA_JSON,
            "--seed", "3", "--resize-h", "64", "--resize-w", "60", "--crop", "48"]
    outs = []
    for run, threads in (("a", 1), ("b", 1), ("c", 2)):
        out = tmp_path / f"out_{run}"
        assert main(args + ["--output", str(out), "--threads", str(threads)]) == 0
        outs.append(read_tree(out))
    assert outs[0] == outs[1]
    assert outs[0] == outs[2]
    assert "manifest.json" in outs[0]


def test_augment_manifest_audit_trail(tmp_path, np_rng):
    corpus = tmp_path / "corpus"
    make_corpus(corpus, 3, np_rng, h=80, w=72)
    out = tmp_path / "out"
    assert main(["augment", "--input", str(corpus), "--output", str(out),
                 "--policy", TRRA_JSON, "--seed", "1", "--resize-h", "64",
                 "--resize-w", "60", "--crop", "48"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 1
    assert manifest["policy"]["variant"] == "TRRA"
    assert len(manifest["items"]) == 3
    from slicelab.transforms import KIND_BY_NAME
    for item in manifest["items"]:
        assert (out / item["output"]).exists()
        assert len(item["instances"]) <= 7
        cats = [KIND_BY_NAME[inst["kind"]].category for inst in item["instances"]]
        assert cats.count("color") <= 5
        assert cats.count("shape") <= 2
        for inst in item["instances"]:
            assert {"kind", "level", "param", "sign"} <= set(inst)
        assert len(item["crop_offset"]) == 2


def test_augment_trra_p0_is_resize_plus_crop(tmp_path, np_rng):
    corpus = tmp_path / "corpus"
    corpus.mkdir(parents=True, exist_ok=True)
    img = random_image(np_rng, 80, 72)
    image_write_png(img, corpus / "only.png")
    out = tmp_path / "out"
    policy = '{"variant": "TRRA", "n_color": 5, "n_shape": 2, "m_lo": 5, "m_hi": 30, "p": 0}'
    assert main(["augment", "--input", str(corpus), "--output", str(out),
                 "--policy", policy, "--seed", "5", "--resize-h", "64",
                 "--resize-w", "60", "--crop", "48"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    item = manifest["items"][0]
    assert item["instances"] == []
    oy, ox = item["crop_offset"]
    resized = resize_bilinear(img, 64, 60)
    produced = image_read_png(out / item["output"])
    assert np.array_equal(produced, resized[oy:oy + 48, ox:ox + 48])


def test_augment_expands_volumes(tmp_path, np_rng):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    vol = np_rng.normal(size=(43, 80, 72)).astype(np.float32)
    volume_write(vol, corpus / "subj.vol")
    out = tmp_path / "out"
    assert main(["augment", "--input", str(corpus), "--output", str(out),
                 "--policy", '{"variant": "RA", "n": 1, "m": 5}', "--seed", "0",
                 "--resize-h", "64", "--resize-w", "60", "--crop", "48"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["items"]) == 3
    assert manifest["items"][0]["output"] == "subj_slice000.png"
    assert image_read_png(out / "subj_slice002.png").shape == (48, 48, 3)


def test_augment_records_bad_inputs_and_exits_2(tmp_path, np_rng):
    corpus = tmp_path / "corpus"
    make_corpus(corpus, 2, np_rng, h=80, w=72)
    (corpus / "broken.png").write_bytes(b"not a png")
    out = tmp_path / "out"
    rc = main(["augment", "--input", str(corpus), "--output", str(out),
               "--policy", '{"variant": "RA", "n": 1, "m": 5}', "--seed", "0",
               "--resize-h", "64", "--resize-w", "60", "--crop", "48"])
    assert rc == 2
    manifest = json.loads((out / "manifest.json").read_text())
    errors = [i for i in manifest["items"] if "error" in i]
    assert len(errors) == 1
    assert errors[0]["input"] == "broken.png"
    assert sum(1 for i in manifest["items"] if "error" not in i) == 2


def test_augment_config_file_with_flag_override(tmp_path, np_rng):
    corpus = tmp_path / "corpus"
    make_corpus(corpus, 2, np_rng, h=80, w=72)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "input": str(corpus), "output": str(tmp_path / "cfg_out"),
        "policy": {"variant": "RA", "n": 1, "m": 5},
        "seed": 9, "resize_h": 64, "resize_w": 60, "crop": 48,
    }))
    assert main(["augment", "--config", str(cfg)]) == 0
    assert (tmp_path / "cfg_out" / "manifest.json").exists()
    # flag overrides the config seed
    out2 = tmp_path / "out2"
    assert main(["augment", "--config", str(cfg), "--seed", "10",
                 "--output", str(out2)]) == 0
    m2 = json.loads((out2 / "manifest.json").read_text())
    assert m2["seed"] == 10


def test_augment_validation_errors_exit_2(tmp_path):
    assert main(["augment", "--input", str(tmp_path / "nope"),
                 "--output", str(tmp_path / "o"), "--policy",
                 '{"variant": "RA", "n": 1, "m": 5}']) == 2
    (tmp_path / "empty").mkdir()
    assert main(["augment", "--input", str(tmp_path / "empty"),
                 "--output", str(tmp_path / "o"), "--policy",
                 '{"variant": "RA", "n": 1, "m": 5}']) == 2
    assert main(["augment", "--input", str(tmp_path / "empty"),
                 "--output", str(tmp_path / "o"), "--policy", "{bogus"]) == 2


# ---------------------------------------------------------------------------
# split


def test_split_command_6_2_2(tmp_path):
    roster = tmp_path / "roster.csv"
    rows = ["subject_id,label,age,sex"]
    for i in range(10):
        rows.append(f"S{i:02d},1,{70 + i},{'M' if i % 2 else 'F'}")
    roster.write_text("\n".join(rows) + "\n")
    out = tmp_path / "split.json"
    assert main(["split", "--roster", str(roster), "--seed", "4",
                 "--output", str(out)]) == 0
    result = json.loads(out.read_text())
    assert len(result["train"]) == 6
    assert len(result["val"]) == 2
    assert len(result["test"]) == 2
    assert result["seed"] == 4
    assert "balance" in result


def test_split_missing_roster_exit_2(tmp_path):
    assert main(["split", "--roster", str(tmp_path / "nope.csv"),
                 "--output", str(tmp_path / "s.json")]) == 2


# ---------------------------------------------------------------------------
# aggregate


def perfect_preds(subjects, slices):
    preds = []
    for s, label in subjects:
        for j in range(slices):
            logits = (0.0, 4.0) if label == 1 else (4.0, 0.0)
            preds.append(SlicePrediction(s, j, logits, label))
    return preds


def test_aggregate_perfect_predictions(tmp_path):
    val = tmp_path / "val.csv"
    test = tmp_path / "test.csv"
    write_predictions_csv(perfect_preds([("V1", 1), ("V2", 0)], 4), val)
    write_predictions_csv(perfect_preds([("T1", 1), ("T2", 0), ("T3", 1)], 4), test)
    out = tmp_path / "agg"
    assert main(["aggregate", "--val", str(val), "--test", str(test),
                 "--slices-per-subject", "4", "--output-dir", str(out)]) == 0
    weights = json.loads((out / "weights.json").read_text())
    assert len(weights) == 4
    assert sum(weights) == pytest.approx(1.0, abs=1e-9)
    report = json.loads((out / "metrics.json").read_text())
    assert report["accuracy"] == 1.0
    assert report["auc"] == 1.0
    decisions = json.loads((out / "decisions.json").read_text())
    assert {d["subject_id"]: d["predicted"] for d in decisions} == \
        {"T1": 1, "T2": 0, "T3": 1}


def test_aggregate_schema_error_exit_2(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    ok = tmp_path / "ok.csv"
    write_predictions_csv(perfect_preds([("A", 1)], 2), ok)
    assert main(["aggregate", "--val", str(bad), "--test", str(ok),
                 "--slices-per-subject", "2",
                 "--output-dir", str(tmp_path / "o")]) == 2


# ---------------------------------------------------------------------------
# explain


def test_explain_writes_heatmap_and_overlay(tmp_path, np_rng):
    params = init_params(2, seed=3)
    x = np_rng.uniform(0.0, 1.0, size=(3, 10, 12))
    bundle = make_bundle(params, x)
    bundle_dir = tmp_path / "bundle"
    save_bundle(bundle, bundle_dir)
    base = tmp_path / "base.png"
    image_write_png(random_image(np_rng, 16, 20), base)
    out = tmp_path / "explain"
    assert main(["explain", "--bundle", str(bundle_dir), "--base-image",
                 str(base), "--output-dir", str(out)]) == 0
    heat = tensor_read(out / "heatmap.tsr")
    assert heat.shape == (8, 10)
    assert heat.min() >= 0.0 and heat.max() <= 1.0
    overlay = image_read_png(out / "overlay.png")
    assert overlay.shape == (16, 20, 3)


def test_explain_bad_bundle_exit_2(tmp_path):
    assert main(["explain", "--bundle", str(tmp_path / "nope"),
                 "--output-dir", str(tmp_path / "o")]) == 2


# ---------------------------------------------------------------------------
# gridsearch


def test_gridsearch_emits_full_grid(tmp_path):
    for variant, count in (("RA", 48), ("RA23", 48), ("RRA23", 40), ("TRRA", 36)):
        out = tmp_path / variant
        assert main(["gridsearch", "--variant", variant,
                     "--output-dir", str(out)]) == 0
        configs = list((out / "configs").glob("*.json"))
        assert len(configs) == count
        manifest = json.loads((out / "grid_manifest.json").read_text())
        assert len(manifest["config_ids"]) == count


def write_metrics(path, ids, split="val", accuracies=None, drop=0, dupe=False):
    lines = ["config_id,split,accuracy"]
    use = ids[drop:]
    for i, cid in enumerate(use):
        acc = accuracies[i] if accuracies else 0.5 + (i % 10) / 100.0
        lines.append(f"{cid},{split},{acc}")
    if dupe:
        lines.append(lines[1])
    Path(path).write_text("\n".join(lines) + "\n")


def test_gridsearch_ranks_by_val_accuracy(tmp_path):
    out = tmp_path / "grid"
    assert main(["gridsearch", "--variant", "TRRA", "--output-dir", str(out)]) == 0
    ids = json.loads((out / "grid_manifest.json").read_text())["config_ids"]
    metrics_csv = tmp_path / "val.csv"
    accs = [0.5 + i / 1000.0 for i in range(len(ids))]
    write_metrics(metrics_csv, ids, accuracies=accs)
    assert main(["gridsearch", "--variant", "TRRA", "--output-dir", str(out),
                 "--metrics", str(metrics_csv)]) == 0
    ranked = json.loads((out / "ranked.json").read_text())
    assert ranked["winner"] == ids[-1]            # highest accuracy
    assert ranked["ranked"][0]["val_accuracy"] == max(accs)
    assert [r["rank"] for r in ranked["ranked"][:3]] == [1, 2, 3]


def test_gridsearch_rejects_test_split_rows(tmp_path):
    out = tmp_path / "grid"
    main(["gridsearch", "--variant", "TRRA", "--output-dir", str(out)])
    ids = json.loads((out / "grid_manifest.json").read_text())["config_ids"]
    metrics_csv = tmp_path / "test.csv"
    write_metrics(metrics_csv, ids, split="test")
    assert main(["gridsearch", "--variant", "TRRA", "--output-dir", str(out),
                 "--metrics", str(metrics_csv)]) == 2


def test_gridsearch_rejects_missing_and_duplicate_ids(tmp_path):
    out = tmp_path / "grid"
    main(["gridsearch", "--variant", "TRRA", "--output-dir", str(out)])
    ids = json.loads((out / "grid_manifest.json").read_text())["config_ids"]
    missing = tmp_path / "missing.csv"
    write_metrics(missing, ids, drop=2)
    assert main(["gridsearch", "--variant", "TRRA", "--output-dir", str(out),
                 "--metrics", str(missing)]) == 2
    dupes = tmp_path / "dupes.csv"
    write_metrics(dupes, ids, dupe=True)
    assert main(["gridsearch", "--variant", "TRRA", "--output-dir", str(out),
                 "--metrics", str(dupes)]) == 2


# ---------------------------------------------------------------------------
# bench


def test_bench_reports_throughput_and_determinism(tmp_path, np_rng):
    corpus = tmp_path / "corpus"
    make_corpus(corpus, 4, np_rng, h=80, w=72)
    report_path = tmp_path / "report.json"
    assert main(["bench", "--input", str(corpus), "--policy", TRRA_JSON,
                 "--seed", "2", "--threads", "1,2",
                 "--output", str(report_path)]) == 0
    report = json.loads(report_path.read_text())
    assert report["images"] == 4
    assert report["outputs_identical"] is True
    assert set(report["thread_counts"]) == {"1", "2"}
    for stats in report["thread_counts"].values():
        assert stats["images_per_second"] > 0
    assert report["per_kind"]
    for entry in report["per_kind"].values():
        assert entry["applications"] >= 1
        assert entry["seconds"] >= 0.0


def test_bench_empty_corpus_exit_2(tmp_path):
    (tmp_path / "empty").mkdir()
    assert main(["bench", "--input", str(tmp_path / "empty"),
                 "--policy", TRRA_JSON]) == 2


def test_bench_empty_policy_faster_than_trra(tmp_path, np_rng):
    corpus = tmp_path / "corpus"
    make_corpus(corpus, 8, np_rng, h=120, w=110)
    reports = {}
    empty = '{"variant": "TRRA", "n_color": 5, "n_shape": 2, "m_lo": 5, "m_hi": 30, "p": 0}'
    full = '{"variant": "TRRA", "n_color": 5, "n_shape": 2, "m_lo": 5, "m_hi": 30, "p": 1}'
    for name, policy in (("empty", empty), ("full", full)):
        path = tmp_path / f"{name}.json"
        assert main(["bench", "--input", str(corpus), "--policy", policy,
                     "--seed", "1", "--threads", "1", "--output", str(path)]) == 0
        reports[name] = json.loads(path.read_text())
    ips_empty = reports["empty"]["thread_counts"]["1"]["images_per_second"]
    ips_full = reports["full"]["thread_counts"]["1"]["images_per_second"]
    assert ips_empty > ips_full
    assert not reports["empty"]["per_kind"]
    assert reports["full"]["per_kind"]


# ---------------------------------------------------------------------------
# earlystop


def test_earlystop_command_flat_sequence(tmp_path):
    metrics = tmp_path / "metrics.txt"
    metrics.write_text("\n".join(["0.8"] * 30) + "\n")
    out = tmp_path / "result.json"
    assert main(["earlystop", "--metrics", str(metrics),
                 "--output", str(out)]) == 0
    result = json.loads(out.read_text())
    assert result["stopped"] is True
    assert result["stop_epoch"] == 21
    assert result["best_epoch"] == 1


def test_earlystop_increasing_never_stops(tmp_path):
    metrics = tmp_path / "metrics.txt"
    metrics.write_text("\n".join(str(0.5 + i / 100) for i in range(40)) + "\n")
    out = tmp_path / "result.json"
    assert main(["earlystop", "--metrics", str(metrics), "--output", str(out)]) == 0
    result = json.loads(out.read_text())
    assert result["stopped"] is False
    assert result["best_epoch"] == 40


def test_earlystop_bad_file_exit_2(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("not-a-number\n")
    assert main(["earlystop", "--metrics", str(bad)]) == 2
