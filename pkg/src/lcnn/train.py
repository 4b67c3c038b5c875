"""Training loop, learning-rate sweep, evaluation and run artifacts.

One loop owns the model; everything is single-threaded and deterministic
for a fixed seed. Each epoch logs train and test loss/accuracy; the best
test-accuracy weights are snapshotted alongside the final ones, and both
are scored at the end since either reading of "final model" is defensible.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Manifest, make_batches
from .errors import InputDataError, TrainingDiverged
from .metrics import (
    ConfusionMatrix,
    confusion_from_predictions,
    confusion_table,
    format_metric,
    metrics_from_confusion,
)
from .model import Model, ModelSpec, build_model
from .optim import Adam, Sgd, bce_loss

# Learning rates swept in the experiments this package reproduces.
DEFAULT_ETA_SWEEP = (0.0001, 0.0005, 0.001, 0.005, 0.01, 0.05, 0.1)

THRESHOLD = 0.5  # probability at or above which a sample is called tumorous


@dataclass
class TrainConfig:
    epochs: int = 50
    eta: float = 0.005
    optimizer: str = "adam"
    batch_size: int = 32
    seed: int = 0
    augment: bool = False
    precision: int = 32
    eta_sweep: tuple = DEFAULT_ETA_SWEEP
    # Optional early exit once train accuracy reaches this level; None trains
    # the full epoch budget.
    stop_at_train_acc: float | None = None
    # Score the test split every k-th epoch (and always on the last);
    # unevaluated epochs log NaN test columns.
    eval_every: int = 1

    def __post_init__(self):
        if self.epochs < 1:
            raise InputDataError("epochs must be >= 1")
        if self.eval_every < 1:
            raise InputDataError("eval_every must be >= 1")
        if self.eta <= 0:
            raise InputDataError("eta must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise InputDataError(f"unknown optimizer {self.optimizer!r}")
        if self.precision not in (32, 64):
            raise InputDataError("precision must be 32 or 64")

    @property
    def dtype(self):
        return np.float32 if self.precision == 32 else np.float64


@dataclass
class EpochRow:
    epoch: int
    train_loss: float
    train_acc: float
    test_loss: float
    test_acc: float


@dataclass
class TrainLog:
    rows: list = field(default_factory=list)
    final_confusion: ConfusionMatrix | None = None
    final_metrics: dict = field(default_factory=dict)
    best_epoch: int = 0
    best_confusion: ConfusionMatrix | None = None
    best_metrics: dict = field(default_factory=dict)
    best_state: dict = field(default_factory=dict)


def _make_optimizer(cfg: TrainConfig):
    if cfg.optimizer == "adam":
        return Adam(eta=cfg.eta)
    return Sgd(eta=cfg.eta)


def predict_split(model: Model, manifest: Manifest, split: str,
                  batch_size: int = 32) -> tuple:
    """Eval-mode probabilities and labels over a split in manifest order."""
    probs = []
    labels = []
    for batch in make_batches(manifest, split, batch_size, seed=0, epoch=0, shuffle=False):
        probs.append(model.forward(batch.inputs, training=False))
        labels.append(batch.labels)
    return np.concatenate(probs), np.concatenate(labels)


def evaluate(model: Model, manifest: Manifest, split: str = "test",
             batch_size: int = 32) -> tuple:
    """Confusion matrix and metric dict for one split at the 0.5 threshold."""
    probs, labels = predict_split(model, manifest, split, batch_size)
    cm = confusion_from_predictions(labels, probs, THRESHOLD)
    return cm, metrics_from_confusion(cm)


def split_loss_acc(model: Model, manifest: Manifest, split: str,
                   batch_size: int = 32) -> tuple:
    probs, labels = predict_split(model, manifest, split, batch_size)
    loss = bce_loss(labels, probs).value
    acc = float(np.mean((probs >= THRESHOLD) == (labels == 1)))
    return loss, acc


def train(model: Model, manifest: Manifest, cfg: TrainConfig) -> TrainLog:
    """Run the training protocol; the model is updated in place.

    Each epoch shuffles mini-batches with a (seed, epoch)-keyed order,
    accumulates mean BCE loss and accuracy over the train batches, then
    scores the test split in eval mode. A non-finite loss aborts with the
    epoch, batch and parameter norms. When the manifest has no test records
    the test columns are NaN (used by overfit sanity checks).
    """
    opt = _make_optimizer(cfg)
    log = TrainLog()
    has_test = bool(manifest.split_records("test"))
    best_acc = -1.0
    for epoch in range(1, cfg.epochs + 1):
        loss_sum = 0.0
        correct = 0
        seen = 0
        for bi, batch in enumerate(
            make_batches(manifest, "train", cfg.batch_size, cfg.seed, epoch)
        ):
            x = batch.inputs.astype(cfg.dtype, copy=False)
            probs = model.forward(x, training=True)
            loss = bce_loss(batch.labels, probs)
            if not np.isfinite(loss.value):
                raise TrainingDiverged(epoch, bi, model.layer_norms())
            model.zero_grads()
            model.backward(loss.grad_wrt_logit)
            opt.step(model.params(), model.grads())
            n = len(batch.labels)
            loss_sum += loss.value * n
            correct += int(np.sum((probs >= THRESHOLD) == (batch.labels == 1)))
            seen += n
        train_loss = loss_sum / seen
        train_acc = correct / seen
        stopping = (
            epoch == cfg.epochs
            or (cfg.stop_at_train_acc is not None and train_acc >= cfg.stop_at_train_acc)
        )
        if has_test and (epoch % cfg.eval_every == 0 or stopping):
            test_loss, test_acc = split_loss_acc(model, manifest, "test", cfg.batch_size)
        else:
            test_loss, test_acc = float("nan"), float("nan")
        log.rows.append(EpochRow(epoch, train_loss, train_acc, test_loss, test_acc))
        if has_test and np.isfinite(test_acc) and test_acc > best_acc:
            best_acc = test_acc
            log.best_epoch = epoch
            log.best_state = model.state_snapshot()
        if cfg.stop_at_train_acc is not None and train_acc >= cfg.stop_at_train_acc:
            break
    if has_test:
        log.final_confusion, log.final_metrics = evaluate(model, manifest, "test", cfg.batch_size)
        if log.best_state:
            final_state = model.state_snapshot()
            model.load_state(log.best_state)
            log.best_confusion, log.best_metrics = evaluate(model, manifest, "test", cfg.batch_size)
            model.load_state(final_state)
    return log


@dataclass
class SweepRow:
    eta: float
    test_acc: float


@dataclass
class SweepResult:
    rows: list
    best_eta: float


def lr_sweep(spec: ModelSpec, manifest: Manifest, cfg: TrainConfig,
             dtype=None) -> SweepResult:
    """One independent training run per learning rate (fresh init, same seed).

    Returns rows sorted by learning rate with the final-epoch test accuracy,
    and the argmax learning rate.
    """
    if not cfg.eta_sweep:
        raise InputDataError("eta_sweep must be nonempty")
    rows = []
    for eta in sorted(cfg.eta_sweep):
        model = build_model(spec, seed=cfg.seed, dtype=dtype or cfg.dtype)
        run_cfg = replace(cfg, eta=eta)
        try:
            log = train(model, manifest, run_cfg)
            acc = log.rows[-1].test_acc
        except TrainingDiverged:
            acc = float("nan")  # divergence recorded, not fatal to the sweep
        rows.append(SweepRow(eta=eta, test_acc=acc))
    finite = [r for r in rows if np.isfinite(r.test_acc)]
    if not finite:
        raise TrainingDiverged(0, 0, {})
    best = max(finite, key=lambda r: r.test_acc)
    return SweepResult(rows=rows, best_eta=best.eta)


def format_float(v: float) -> str:
    """Shortest exact decimal for a float; locale-independent."""
    return repr(float(v))


def emit_curves(log: TrainLog, out_dir: str) -> None:
    """Write curves.csv, metrics.json and summary.txt into ``out_dir``."""
    if not log.rows:
        raise InputDataError("training log is empty")
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "curves.csv"), "w", encoding="utf-8") as fh:
        fh.write("epoch,train_loss,train_acc,test_loss,test_acc\n")
        for r in log.rows:
            fh.write(
                f"{r.epoch},{format_float(r.train_loss)},{format_float(r.train_acc)},"
                f"{format_float(r.test_loss)},{format_float(r.test_acc)}\n"
            )
    payload = {
        "epochs": len(log.rows),
        "final": _metric_block(log.final_confusion, log.final_metrics),
        "best_epoch": log.best_epoch,
        "best": _metric_block(log.best_confusion, log.best_metrics),
    }
    with open(os.path.join(out_dir, "metrics.json"), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, allow_nan=True)
        fh.write("\n")
    with open(os.path.join(out_dir, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write(summary_text(log))


def _metric_block(cm: ConfusionMatrix | None, metrics: dict) -> dict:
    block = {}
    if cm is not None:
        block["confusion"] = cm.as_dict()
    block.update({k: metrics.get(k) for k in ("accuracy", "specificity", "recall", "precision", "f1")})
    return block


def summary_text(log: TrainLog) -> str:
    lines = []
    if log.final_confusion is not None:
        lines.append("final-epoch weights (test split):")
        lines.append(confusion_table(log.final_confusion))
        for k in ("accuracy", "specificity", "recall", "precision", "f1"):
            lines.append(f"{k} = {format_metric(log.final_metrics[k])}")
        if log.best_confusion is not None:
            lines.append("")
            lines.append(f"best-test-accuracy weights (epoch {log.best_epoch}):")
            lines.append(confusion_table(log.best_confusion))
            for k in ("accuracy", "specificity", "recall", "precision", "f1"):
                lines.append(f"{k} = {format_metric(log.best_metrics[k])}")
    else:
        lines.append("no test split; metrics unavailable")
    lines.append("")
    return "\n".join(lines)


def read_curves(path: str) -> list:
    """Parse curves.csv back into EpochRow values (exact float round-trip)."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "epoch,train_loss,train_acc,test_loss,test_acc":
            raise InputDataError(f"unexpected curves header: {header}")
        for line in fh:
            e, tl, ta, vl, va = line.strip().split(",")
            rows.append(EpochRow(int(e), float(tl), float(ta), float(vl), float(va)))
    return rows
