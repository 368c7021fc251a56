"""Subject-level train/validation/test splitting with demographic checks.

Splits are stratified by class label at a 6:2:2 ratio (each set within one
subject of the exact per-class ratio) and retried with fresh derived seeds
until the age and sex distributions of every pair of sets are statistically
indistinguishable (all two-sided p-values above 0.05), so no subject's data
can leak across sets and no set is demographically skewed.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy import stats

from .rng import Rng

SET_NAMES = ("train", "val", "test")
P_THRESHOLD = 0.05
DEFAULT_MAX_RETRIES = 100

_RATIOS = (0.6, 0.2)  # train, val; test takes the remainder


@dataclass(frozen=True)
class SubjectRecord:
    subject_id: str
    label: int          # class, 0 or 1
    age: float
    sex: str            # "M" or "F"

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")
        if self.sex not in ("M", "F"):
            raise ValueError(f"sex must be 'M' or 'F', got {self.sex!r}")


@dataclass(frozen=True)
class TestResult:
    """Two-sided p-value plus the statistic; degenerate marks inputs that
    violate the test's preconditions (p is then defined as 1.0)."""

    p: float
    statistic: float = 0.0
    degenerate: bool = False


@dataclass(frozen=True)
class SplitResult:
    train: tuple[str, ...]
    val: tuple[str, ...]
    test: tuple[str, ...]
    seed: int
    balance: dict
    warning: bool = False
    attempts: int = 1

    def set_of(self, name: str) -> tuple[str, ...]:
        return getattr(self, name)

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "train": list(self.train),
            "val": list(self.val),
            "test": list(self.test),
            "balance": self.balance,
            "warning": self.warning,
            "attempts": self.attempts,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SplitResult":
        return cls(
            train=tuple(obj["train"]),
            val=tuple(obj["val"]),
            test=tuple(obj["test"]),
            seed=obj["seed"],
            balance=obj.get("balance", {}),
            warning=obj.get("warning", False),
            attempts=obj.get("attempts", 1),
        )


@dataclass(frozen=True)
class LeakageReport:
    leaks: tuple[dict, ...]

    @property
    def leak_free(self) -> bool:
        return not self.leaks

    def to_json(self) -> dict:
        return {"leak_free": self.leak_free, "leaks": [dict(x) for x in self.leaks]}


def welch_t_p(a, b) -> TestResult:
    """Welch's unequal-variance t-test, two-sided.

    Degrees of freedom by Welch-Satterthwaite.  Samples smaller than two,
    or with zero variance in both groups, are degenerate: p = 1.0.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        return TestResult(p=1.0, degenerate=True)
    va = a.var(ddof=1)
    vb = b.var(ddof=1)
    sa = va / a.size
    sb = vb / b.size
    if sa + sb == 0.0:
        return TestResult(p=1.0, degenerate=True)
    t = (a.mean() - b.mean()) / math.sqrt(sa + sb)
    df = (sa + sb) ** 2 / (
        sa**2 / (a.size - 1) + sb**2 / (b.size - 1)
    )
    p = 2.0 * stats.t.sf(abs(t), df)
    return TestResult(p=float(min(p, 1.0)), statistic=float(t))


def chi2_p(counts) -> TestResult:
    """Pearson chi-square (1 d.f., no continuity correction) on a 2x2 table.

    A zero row or column marginal is degenerate: p = 1.0.
    """
    obs = np.asarray(counts, dtype=np.float64)
    if obs.shape != (2, 2):
        raise ValueError(f"counts must be 2x2, got shape {obs.shape}")
    rows = obs.sum(axis=1)
    cols = obs.sum(axis=0)
    total = obs.sum()
    if total == 0 or (rows == 0).any() or (cols == 0).any():
        return TestResult(p=1.0, degenerate=True)
    expected = np.outer(rows, cols) / total
    statistic = float(((obs - expected) ** 2 / expected).sum())
    p = float(stats.chi2.sf(statistic, df=1))
    return TestResult(p=min(p, 1.0), statistic=statistic)


def _allocate(n: int) -> tuple[int, int, int]:
    # round-half-up keeps each set within one subject of the exact ratio
    n_train = int(math.floor(_RATIOS[0] * n + 0.5))
    n_val = int(math.floor(_RATIOS[1] * n + 0.5))
    return n_train, n_val, n - n_train - n_val

def _balance_report(
    roster: Mapping[str, SubjectRecord], sets: dict[str, list[str]]
) -> tuple[dict, float]:
    report: dict = {}
    worst = 1.0
    for i in range(len(SET_NAMES)):
        for j in range(i + 1, len(SET_NAMES)):
            name_a, name_b = SET_NAMES[i], SET_NAMES[j]
            rec_a = [roster[s] for s in sets[name_a]]
            rec_b = [roster[s] for s in sets[name_b]]
            age = welch_t_p([r.age for r in rec_a], [r.age for r in rec_b])
            sex = chi2_p([
                [sum(r.sex == "M" for r in rec_a), sum(r.sex == "F" for r in rec_a)],
                [sum(r.sex == "M" for r in rec_b), sum(r.sex == "F" for r in rec_b)],
            ])
            report[f"{name_a}_vs_{name_b}"] = {
                "age_p": age.p,
                "age_degenerate": age.degenerate,
                "sex_p": sex.p,
                "sex_degenerate": sex.degenerate,
            }
            worst = min(worst, age.p, sex.p)
    return report, worst


def split_subjects(
    roster: Iterable[SubjectRecord],
    seed: int,
    max_retries: int = DEFAULT_MAX_RETRIES,
) -> SplitResult:
    """Stratified 6:2:2 subject split, retried until demographically balanced.

    Each attempt shuffles every class with a seed derived from ``(seed,
    attempt)`` and allocates 6:2:2 per class.  The first attempt whose six
    pairwise p-values (Welch t on age, chi-square on sex, for each pair of
    sets) all exceed 0.05 is returned; if ``max_retries`` extra attempts
    never get there, the attempt with the largest worst-case p-value is
    returned with ``warning=True``.
    """
    records = list(roster)
    ids = [r.subject_id for r in records]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate subject_id in roster")
    by_id = {r.subject_id: r for r in records}
    by_class: dict[int, list[str]] = {0: [], 1: []}
    for r in records:
        by_class[r.label].append(r.subject_id)
    for label, members in by_class.items():
        if members and len(members) < 5:
            raise ValueError(
                f"class {label} has {len(members)} subjects; at least 5 required"
            )
    if not any(by_class.values()):
        raise ValueError("empty roster")

    best: SplitResult | None = None
    best_worst_p = -1.0
    for attempt in range(1 + max_retries):
        rng = Rng.derive(seed, stream_id=attempt)
        sets: dict[str, list[str]] = {name: [] for name in SET_NAMES}
        for label in sorted(by_class):
            members = sorted(by_class[label])
            rng.shuffle(members)
            n_train, n_val, _ = _allocate(len(members))
            sets["train"] += members[:n_train]
            sets["val"] += members[n_train:n_train + n_val]
            sets["test"] += members[n_train + n_val:]
        balance, worst_p = _balance_report(by_id, sets)
        result = SplitResult(
            train=tuple(sorted(sets["train"])),
            val=tuple(sorted(sets["val"])),
            test=tuple(sorted(sets["test"])),
            seed=seed,
            balance=balance,
            warning=False,
            attempts=attempt + 1,
        )
        if worst_p > P_THRESHOLD:
            return result
        if worst_p > best_worst_p:
            best_worst_p = worst_p
            best = result
    assert best is not None
    return SplitResult(
        train=best.train, val=best.val, test=best.test, seed=best.seed,
        balance=best.balance, warning=True, attempts=best.attempts,
    )


def check_leakage(split: SplitResult, item_index: Mapping[str, str]) -> LeakageReport:
    """Find subjects whose items land in more than one of train/val/test.

    ``item_index`` maps each item (e.g. a slice file) to its subject_id.
    A subject assigned to two or more sets puts every one of its items in
    all of them, which is exactly the leakage this report surfaces.  An
    item whose subject appears in no set raises: it cannot be audited.
    """
    membership: dict[str, set[str]] = {}
    for name in SET_NAMES:
        for subject in split.set_of(name):
            membership.setdefault(subject, set()).add(name)
    items_by_subject: dict[str, list[str]] = {}
    for item, subject in item_index.items():
        if subject not in membership:
            raise KeyError(f"item {item!r} maps to unknown subject {subject!r}")
        items_by_subject.setdefault(subject, []).append(item)
    leaks = []
    for subject in sorted(items_by_subject):
        sets = membership[subject]
        if len(sets) >= 2:
            leaks.append({
                "subject_id": subject,
                "sets": sorted(sets),
                "items": sorted(items_by_subject[subject]),
            })
    return LeakageReport(leaks=tuple(leaks))


def read_roster_csv(path) -> list[SubjectRecord]:
    """Roster CSV with header subject_id,label,age,sex."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"subject_id", "label", "age", "sex"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(
                f"roster must have columns {sorted(required)}, got {reader.fieldnames}"
            )
        return [
            SubjectRecord(
                subject_id=row["subject_id"],
                label=int(row["label"]),
                age=float(row["age"]),
                sex=row["sex"].strip(),
            )
            for row in reader
        ]


def write_split_json(split: SplitResult, path) -> None:
    with open(path, "w") as fh:
        json.dump(split.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_split_json(path) -> SplitResult:
    with open(path) as fh:
        return SplitResult.from_json(json.load(fh))
