"""Slice-to-subject soft voting, slice-weight fitting, and the binary
classification metric suite.

A subject is scored by ``s_i = sum_j w_j * p_ij`` where ``p_ij`` is the
softmax probability of class ``i`` for slice ``j`` and the slice weights
``w_j`` are fitted on validation data: the number of correct slice-j
predictions across subjects, normalized over all slices.  The subject's
predicted class is the argmax of the scores, ties breaking toward class 0.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

POSITIVE_CLASS = 1


@dataclass(frozen=True)
class SlicePrediction:
    subject_id: str
    slice_index: int
    logits: tuple[float, float]
    label: int

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")
        if self.slice_index < 0:
            raise ValueError(f"slice_index must be >= 0, got {self.slice_index}")


@dataclass(frozen=True)
class SubjectDecision:
    subject_id: str
    scores: tuple[float, float]
    predicted: int
    label: int


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    sensitivity: float | None
    specificity: float | None
    auc: float | None
    tp: int
    tn: int
    fp: int
    fn: int
    single_class: bool = False

    def to_json(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "auc": self.auc,
            "confusion": {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn},
            "single_class": self.single_class,
        }


def softmax2(logits) -> tuple[float, float]:
    """Numerically stable two-class softmax."""
    x0, x1 = float(logits[0]), float(logits[1])
    if not (math.isfinite(x0) and math.isfinite(x1)):
        raise ValueError(f"logits must be finite, got {logits!r}")
    m = max(x0, x1)
    e0 = math.exp(x0 - m)
    e1 = math.exp(x1 - m)
    z = e0 + e1
    return e0 / z, e1 / z


def cross_entropy(logits, label: int) -> float:
    """Cross-entropy -log softmax(logits)[label] via the log-sum-exp form."""
    if label not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {label!r}")
    x0, x1 = float(logits[0]), float(logits[1])
    if not (math.isfinite(x0) and math.isfinite(x1)):
        raise ValueError(f"logits must be finite, got {logits!r}")
    m = max(x0, x1)
    lse = m + math.log(math.exp(x0 - m) + math.exp(x1 - m))
    return lse - (x0 if label == 0 else x1)


def _slice_table(
    preds: list[SlicePrediction], slices_per_subject: int
) -> dict[str, list[SlicePrediction]]:
    """Group by subject and require one prediction per slice index."""
    groups: dict[str, dict[int, SlicePrediction]] = {}
    for pr in preds:
        if pr.slice_index >= slices_per_subject:
            raise ValueError(
                f"slice_index {pr.slice_index} out of range for "
                f"{slices_per_subject} slices per subject"
            )
        seen = groups.setdefault(pr.subject_id, {})
        if pr.slice_index in seen:
            raise ValueError(
                f"duplicate slice {pr.slice_index} for subject {pr.subject_id!r}"
            )
        seen[pr.slice_index] = pr
    table = {}
    for subject, by_slice in groups.items():
        missing = set(range(slices_per_subject)) - set(by_slice)
        if missing:
            raise ValueError(
                f"subject {subject!r} is missing slices {sorted(missing)[:5]}"
            )
        table[subject] = [by_slice[j] for j in range(slices_per_subject)]
    return table


def _predicted_class(p: tuple[float, float]) -> int:
    # argmax with ties toward class 0
    return 1 if p[1] > p[0] else 0


def fit_weights(val_preds: list[SlicePrediction], slices_per_subject: int) -> np.ndarray:
    """Fit slice weights from per-slice validation correctness.

    w_j = c_j / sum_k c_k where c_j counts the subjects whose slice-j
    prediction (argmax of the softmax) matches their label.
    """
    table = _slice_table(val_preds, slices_per_subject)
    if not table:
        raise ValueError("no validation predictions")
    correct = np.zeros(slices_per_subject, dtype=np.float64)
    for slices in table.values():
        for j, pr in enumerate(slices):
            if _predicted_class(softmax2(pr.logits)) == pr.label:
                correct[j] += 1
    total = correct.sum()
    if total == 0:
        raise ValueError("no correct slice predictions; weights are undefined")
    return correct / total


def decide_subject(preds: list[SlicePrediction], weights: np.ndarray) -> SubjectDecision:
    """Soft-vote one subject's slice predictions into a class decision."""
    w = np.asarray(weights, dtype=np.float64)
    subjects = {pr.subject_id for pr in preds}
    if len(subjects) != 1:
        raise ValueError(f"expected predictions for one subject, got {sorted(subjects)}")
    table = _slice_table(preds, len(w))
    (subject_id, slices), = table.items()
    s0 = 0.0
    s1 = 0.0
    for j, pr in enumerate(slices):
        p0, p1 = softmax2(pr.logits)
        s0 += w[j] * p0
        s1 += w[j] * p1
    predicted = 1 if s1 > s0 else 0
    return SubjectDecision(
        subject_id=subject_id,
        scores=(s0, s1),
        predicted=predicted,
        label=slices[0].label,
    )


def decide_subjects(
    preds: list[SlicePrediction], weights: np.ndarray
) -> list[SubjectDecision]:
    """Group a prediction list by subject and decide each one."""
    by_subject: dict[str, list[SlicePrediction]] = {}
    for pr in preds:
        by_subject.setdefault(pr.subject_id, []).append(pr)
    return [
        decide_subject(group, weights) for _, group in sorted(by_subject.items())
    ]


def auc_mann_whitney(pos_scores, neg_scores) -> float:
    """AUC as the Mann-Whitney statistic: concordant pairs plus half the
    ties, over all positive-negative pairs."""
    pos = np.asarray(pos_scores, dtype=np.float64)
    neg = np.asarray(neg_scores, dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise ValueError("AUC needs at least one positive and one negative")
    diff = pos[:, None] - neg[None, :]
    concordant = float((diff > 0).sum())
    ties = float((diff == 0).sum())
    return (concordant + 0.5 * ties) / (pos.size * neg.size)


def metrics(decisions: list[SubjectDecision]) -> MetricsReport:
    """Confusion metrics over subject decisions; positive class is 1.

    With only one class present, accuracy is still reported and
    sensitivity/specificity/AUC are flagged undefined (None).
    """
    if not decisions:
        raise ValueError("no decisions")
    tp = sum(1 for d in decisions if d.predicted == 1 and d.label == 1)
    tn = sum(1 for d in decisions if d.predicted == 0 and d.label == 0)
    fp = sum(1 for d in decisions if d.predicted == 1 and d.label == 0)
    fn = sum(1 for d in decisions if d.predicted == 0 and d.label == 1)
    accuracy = (tp + tn) / len(decisions)
    pos = [d.scores[1] for d in decisions if d.label == 1]
    neg = [d.scores[1] for d in decisions if d.label == 0]
    if not pos or not neg:
        return MetricsReport(accuracy, None, None, None, tp, tn, fp, fn,
                             single_class=True)
    return MetricsReport(
        accuracy=accuracy,
        sensitivity=tp / (tp + fn),
        specificity=tn / (tn + fp),
        auc=auc_mann_whitney(pos, neg),
        tp=tp, tn=tn, fp=fp, fn=fn,
    )


# ---------------------------------------------------------------------------
# file formats

PREDICTION_HEADER = ["subject_id", "slice_index", "logit0", "logit1", "label"]


def read_predictions_csv(path) -> list[SlicePrediction]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != PREDICTION_HEADER:
            raise ValueError(
                f"prediction CSV must have header {PREDICTION_HEADER}, got {reader.fieldnames}"
            )
        return [
            SlicePrediction(
                subject_id=row["subject_id"],
                slice_index=int(row["slice_index"]),
                logits=(float(row["logit0"]), float(row["logit1"])),
                label=int(row["label"]),
            )
            for row in reader
        ]


def write_predictions_csv(preds: list[SlicePrediction], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PREDICTION_HEADER)
        for pr in preds:
            writer.writerow([pr.subject_id, pr.slice_index,
                             repr(pr.logits[0]), repr(pr.logits[1]), pr.label])


def write_weights_json(weights: np.ndarray, path) -> None:
    with open(path, "w") as fh:
        json.dump([float(w) for w in weights], fh)
        fh.write("\n")


def read_weights_json(path) -> np.ndarray:
    with open(path) as fh:
        return np.asarray(json.load(fh), dtype=np.float64)
