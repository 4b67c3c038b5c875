"""Sweep learning rates on a small synthetic problem and mark the winner.

The full protocol sweeps {0.0001, 0.0005, 0.001, 0.005, 0.01, 0.05, 0.1};
this demo uses a subset and a narrow model so it finishes quickly.

Run: python demos/05_learning_rate_sweep.py
"""

import tempfile

from lcnn.data import SplitSpec, ingest_directory, stratified_split
from lcnn.model import ModelSpec
from lcnn.synthetic import generate_dataset
from lcnn.train import TrainConfig, lr_sweep

root = tempfile.mkdtemp(prefix="lcnn_sweep_")
generate_dataset(root, 160, seed=3)
manifest = ingest_directory(root)
stratified_split(manifest, SplitSpec(train_ratio=0.7, seed=3))

spec = ModelSpec(conv_channels=(8, 16), dense_units=(64, 32, 1))
cfg = TrainConfig(epochs=3, batch_size=16, seed=3,
                  eta_sweep=(0.0005, 0.005, 0.05))
result = lr_sweep(spec, manifest, cfg)

for row in result.rows:
    marker = "  <- best" if row.eta == result.best_eta else ""
    print(f"eta={row.eta:<8g} final test accuracy {row.test_acc:.3f}{marker}")
