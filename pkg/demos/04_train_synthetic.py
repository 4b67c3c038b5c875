"""End-to-end training on a generated dataset, scaled down to run in ~a minute.

Generates 200 synthetic scans, takes a stratified 70:30 split, trains a
narrow variant of the architecture for 5 epochs with Adam at the swept-best
learning rate 0.005, and prints the per-epoch curves plus final metrics.
Use the CLI (`lcnn train`) for full-size runs.

Run: python demos/04_train_synthetic.py
"""

import tempfile

from lcnn.data import SplitSpec, ingest_directory, stratified_split
from lcnn.metrics import confusion_table
from lcnn.model import ModelSpec, build_model
from lcnn.synthetic import generate_dataset
from lcnn.train import TrainConfig, train

root = tempfile.mkdtemp(prefix="lcnn_demo_")
generate_dataset(root, 200, seed=7)
manifest = ingest_directory(root)
stratified_split(manifest, SplitSpec(train_ratio=0.7, seed=7))
print(f"dataset: {len(manifest.split_records('train'))} train / "
      f"{len(manifest.split_records('test'))} test")

# Narrow layers keep the demo quick; swap in ModelSpec() for the full network.
spec = ModelSpec(conv_channels=(8, 16), dense_units=(64, 32, 1))
model = build_model(spec, seed=7)
log = train(model, manifest, TrainConfig(epochs=5, eta=0.005, batch_size=20, seed=7))

for row in log.rows:
    print(f"epoch {row.epoch}: train {row.train_loss:.4f}/{row.train_acc:.3f}  "
          f"test {row.test_loss:.4f}/{row.test_acc:.3f}")
print()
print(confusion_table(log.final_confusion))
for key in ("accuracy", "specificity", "recall", "f1"):
    print(f"{key} = {log.final_metrics[key]:.4f}")
