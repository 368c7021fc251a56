"""Hyperparameter grid workflow end to end (desk-scale).

Emits the TRRA grid as config files, fakes per-config validation
accuracies the way an external trainer would report them, and feeds them
back for ranking. Supplying test-split rows is rejected, which is the
selection-hygiene rule the CLI enforces.

Run:  python demos/07_grid_search.py
"""

import json
from pathlib import Path

import numpy as np

from slicelab.cli import main

out_dir = Path("demo_output/07_grid_search")
out_dir.mkdir(parents=True, exist_ok=True)
grid_dir = out_dir / "grid"

rc = main(["gridsearch", "--variant", "TRRA", "--output-dir", str(grid_dir)])
assert rc == 0
ids = json.loads((grid_dir / "grid_manifest.json").read_text())["config_ids"]
print(f"emitted {len(ids)} configs")

# pretend an external trainer measured validation accuracy per config
g = np.random.default_rng(3)
rows = ["config_id,split,accuracy"]
for cid in ids:
    rows.append(f"{cid},val,{0.85 + 0.06 * g.random():.4f}")
metrics_csv = out_dir / "val_metrics.csv"
metrics_csv.write_text("\n".join(rows) + "\n")

rc = main(["gridsearch", "--variant", "TRRA", "--output-dir", str(grid_dir),
           "--metrics", str(metrics_csv)])
assert rc == 0
ranked = json.loads((grid_dir / "ranked.json").read_text())
winner = ranked["winner"]
config = json.loads((grid_dir / "configs" / f"{winner}.json").read_text())
print(f"winner {winner}: {config['policy']}")

# hygiene: test-split metrics must never reach the selection step
bad = out_dir / "test_metrics.csv"
bad.write_text("config_id,split,accuracy\n" + f"{ids[0]},test,0.99\n")
rc = main(["gridsearch", "--variant", "TRRA", "--output-dir", str(grid_dir),
           "--metrics", str(bad)])
print(f"test-split metrics rejected with exit code {rc}")
