"""Leak-free subject-level splitting with demographic balance.

Synthesizes a two-class roster, splits it 6:2:2 at the subject level for
three seeds, prints the demographic-balance p-values, and demonstrates the
leakage audit on both a clean mapping and a deliberately corrupted one.

Run:  python demos/04_subject_split.py
"""

from pathlib import Path

import numpy as np

from slicelab import SubjectRecord, check_leakage, split_subjects
from slicelab.splitter import SplitResult, write_split_json

out_dir = Path("demo_output/04_subject_split")
out_dir.mkdir(parents=True, exist_ok=True)

g = np.random.default_rng(1)
roster = []
for i in range(333):
    roster.append(SubjectRecord(f"AD{i:04d}", 1, float(g.normal(75.0, 7.8)),
                                "M" if g.random() < 0.55 else "F"))
for i in range(338):
    roster.append(SubjectRecord(f"CN{i:04d}", 0, float(g.normal(74.4, 5.7)),
                                "M" if g.random() < 0.49 else "F"))

items = {f"{r.subject_id}_s{j:03d}": r.subject_id for r in roster for j in range(129)}

for seed in (1, 2, 3):
    result = split_subjects(roster, seed=seed)
    sizes = f"{len(result.train)}/{len(result.val)}/{len(result.test)}"
    print(f"seed {seed}: sizes {sizes}, attempts {result.attempts}")
    for pair, ps in result.balance.items():
        print(f"  {pair:14s} age_p={ps['age_p']:.3f} sex_p={ps['sex_p']:.3f}")
    print(f"  leak-free: {check_leakage(result, items).leak_free}")
    write_split_json(result, out_dir / f"split_seed{seed}.json")

# plant a violation: one training subject also shows up in the test set
clean = split_subjects(roster, seed=1)
corrupt = SplitResult(train=clean.train, val=clean.val,
                      test=clean.test + (clean.train[0],),
                      seed=clean.seed, balance=clean.balance)
report = check_leakage(corrupt, items)
print(f"\nplanted violation detected: {[x['subject_id'] for x in report.leaks]}")
