"""Dataset ingestion, stratified splitting, class balancing and batching.

Datasets are directory trees with one subdirectory per class holding PNG or
JPEG images. ``normal/`` maps to label 0; ``tumor/`` to label 1, and the
source folders ``benign/`` and ``malignant/`` are merged into label 1 so
multi-class trees collapse to the binary task.

Augmented copies exist only as manifest records carrying the source path
and a draw seed; their pixels are produced deterministically at batch time,
so nothing is written to disk and a fixed seed reproduces the epoch stream
bit for bit.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, UnidentifiedImageError

from .augment import AugmentConfig, augment_sample, resize_bilinear
from .errors import InputDataError
from .tensor import derive_rng, make_rng

LABEL_NORMAL = 0
LABEL_TUMOR = 1

# Directory-name aliases; benign and malignant both count as tumorous.
CLASS_DIRS = {
    "normal": LABEL_NORMAL,
    "tumor": LABEL_TUMOR,
    "benign": LABEL_TUMOR,
    "malignant": LABEL_TUMOR,
}

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg")

INPUT_SIZE = (100, 100)


@dataclass
class Record:
    """One labeled image; ``origin``/``aug_seed`` are set on augmented copies."""

    path: str
    label: int
    split: str | None = None
    origin: str | None = None
    aug_seed: int | None = None

    @property
    def is_synthetic(self) -> bool:
        return self.origin is not None


@dataclass
class Manifest:
    records: list = field(default_factory=list)
    # Config used when augmented copies were added; needed to replay them.
    augment_config: AugmentConfig | None = None
    # Decoded network inputs keyed by record identity; augmented pixels are
    # deterministic per (path, aug_seed) so caching cannot change results.
    _cache: dict = field(default_factory=dict, repr=False)

    def split_records(self, split: str) -> list:
        return [r for r in self.records if r.split == split]

    def class_counts(self, split: str | None = None) -> dict:
        counts = {LABEL_NORMAL: 0, LABEL_TUMOR: 0}
        for r in self.records:
            if split is None or r.split == split:
                counts[r.label] += 1
        return counts


@dataclass
class SplitSpec:
    train_ratio: float = 0.7
    seed: int = 0
    stratified: bool = True  # always true for this artifact

    def __post_init__(self):
        if not 0.0 < self.train_ratio < 1.0:
            raise ValueError("train_ratio must lie strictly between 0 and 1")


@dataclass
class Batch:
    inputs: np.ndarray  # (B, 100, 100, 1) floats in [0, 1]
    labels: np.ndarray  # (B,) of {0, 1}


def decode_image(path: str) -> np.ndarray:
    """Decode a PNG/JPEG into a single-channel (H, W) array in [0, 1].

    Color images are reduced by the plain average of their channels.
    """
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode in ("P", "CMYK", "YCbCr"):
                im = im.convert("RGB")
            arr = np.asarray(im)
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise InputDataError(f"cannot decode image {path}: {exc}") from exc
    if arr.dtype == np.uint8:
        arr = arr.astype(np.float64) / 255.0
    elif arr.dtype == np.uint16:
        arr = arr.astype(np.float64) / 65535.0
    else:
        arr = arr.astype(np.float64)
    if arr.ndim == 3:
        arr = arr[:, :, :3].mean(axis=2)
    return np.clip(arr, 0.0, 1.0)


def ingest_directory(root: str) -> Manifest:
    """Scan one-subdirectory-per-class image folders into a manifest.

    Undecodable files are skipped with a warning; more than 5% skipped is an
    error, as is a class directory with no usable image.
    """
    if not os.path.isdir(root):
        raise InputDataError(f"data directory not found: {root}")
    class_dirs = [d for d in sorted(os.listdir(root)) if d.lower() in CLASS_DIRS]
    if not class_dirs:
        raise InputDataError(
            f"{root} contains no class directories (expected any of {sorted(CLASS_DIRS)})"
        )
    records = []
    skipped = 0
    seen_labels = set()
    for d in class_dirs:
        label = CLASS_DIRS[d.lower()]
        dir_path = os.path.join(root, d)
        files = [f for f in sorted(os.listdir(dir_path)) if f.lower().endswith(IMAGE_EXTENSIONS)]
        if not files:
            raise InputDataError(f"class directory {dir_path} contains no images")
        for f in files:
            path = os.path.join(dir_path, f)
            try:
                decode_image(path)
            except InputDataError as exc:
                warnings.warn(str(exc))
                skipped += 1
                continue
            records.append(Record(path=path, label=label))
        seen_labels.add(label)
    total = len(records) + skipped
    if skipped > 0.05 * total:
        raise InputDataError(f"{skipped} of {total} images undecodable (more than 5%)")
    if not records:
        raise InputDataError(f"no decodable images under {root}")
    return Manifest(records=records)


def stratified_split(manifest: Manifest, spec: SplitSpec) -> Manifest:
    """Assign splits per class: floor(train_ratio * n) to train via a seeded
    shuffle, the remainder to test. Deterministic for a fixed seed."""
    rng = make_rng(spec.seed)
    by_label: dict = {}
    for r in manifest.records:
        by_label.setdefault(r.label, []).append(r)
    for label in sorted(by_label):
        group = by_label[label]
        if len(group) < 2:
            raise InputDataError(f"class {label} has fewer than 2 records; cannot split")
        order = rng.permutation(len(group))
        n_train = int(np.floor(spec.train_ratio * len(group)))
        for rank, idx in enumerate(order):
            group[idx].split = "train" if rank < n_train else "test"
    return manifest


def balance_train_set(
    manifest: Manifest,
    cfg: AugmentConfig,
    seed: int,
    multiplier: int = 1,
) -> Manifest:
    """Top up the minority train class with augmented copies until the train
    classes are equal, then optionally multiply both classes by ``multiplier``.

    Only train records gain copies; the test split is never touched. Each
    copy stores its source path and a derived draw seed, so its pixels are
    reproducible in isolation.
    """
    if multiplier < 1:
        raise InputDataError(f"multiplier must be >= 1, got {multiplier}")
    manifest.augment_config = cfg
    rng = derive_rng(seed, "balance")
    by_label = {
        LABEL_NORMAL: [r for r in manifest.records if r.split == "train" and r.label == LABEL_NORMAL],
        LABEL_TUMOR: [r for r in manifest.records if r.split == "train" and r.label == LABEL_TUMOR],
    }
    counter = 0

    def add_copies(sources: list, count: int):
        nonlocal counter
        for _ in range(count):
            src = sources[int(rng.integers(0, len(sources)))]
            aug_seed = int(rng.integers(0, 2**63 - 1))
            manifest.records.append(
                Record(
                    path=src.path,
                    label=src.label,
                    split="train",
                    origin=src.path,
                    aug_seed=aug_seed,
                )
            )
            counter += 1

    n_normal, n_tumor = len(by_label[LABEL_NORMAL]), len(by_label[LABEL_TUMOR])
    if n_normal < n_tumor:
        add_copies(by_label[LABEL_NORMAL], n_tumor - n_normal)
    elif n_tumor < n_normal:
        add_copies(by_label[LABEL_TUMOR], n_normal - n_tumor)
    if multiplier > 1:
        target = max(n_normal, n_tumor)
        for label in (LABEL_NORMAL, LABEL_TUMOR):
            add_copies(by_label[label], (multiplier - 1) * target)
    return manifest


def load_input(record: Record, manifest: Manifest | None = None,
               cfg: AugmentConfig | None = None) -> np.ndarray:
    """Produce the 100x100 network input for one record.

    Plain records decode and resize; augmented copies decode their source
    and replay the stored augmentation draw.
    """
    key = (record.path, record.aug_seed)
    if manifest is not None and key in manifest._cache:
        return manifest._cache[key]
    img = decode_image(record.path)
    if record.is_synthetic:
        if cfg is None and manifest is not None:
            cfg = manifest.augment_config
        img = augment_sample(img, cfg or AugmentConfig(), make_rng(record.aug_seed),
                             out_size=INPUT_SIZE)
    else:
        img = resize_bilinear(img, *INPUT_SIZE)
    img = img.astype(np.float32)
    if manifest is not None:
        manifest._cache[key] = img
    return img


def make_batches(
    manifest: Manifest,
    split: str,
    batch_size: int,
    seed: int,
    epoch: int,
    shuffle: bool = True,
    cfg: AugmentConfig | None = None,
):
    """Yield batches of decoded inputs for one split.

    The order is a seeded shuffle keyed on (seed, epoch) only, so the same
    pair reproduces the same batch stream. The final partial batch is kept.
    """
    if batch_size < 1:
        raise InputDataError("batch_size must be >= 1")
    records = manifest.split_records(split)
    if not records:
        raise InputDataError(f"split {split!r} is empty")
    if shuffle:
        order = derive_rng(seed, f"batches/{split}/{epoch}").permutation(len(records))
    else:
        order = np.arange(len(records))
    for start in range(0, len(records), batch_size):
        chunk = [records[i] for i in order[start : start + batch_size]]
        inputs = np.stack([load_input(r, manifest, cfg) for r in chunk])[..., None]
        labels = np.array([r.label for r in chunk], dtype=np.float32)
        yield Batch(inputs=inputs, labels=labels)


def export_manifest(manifest: Manifest, path: str) -> None:
    """Write the audit file: header plus one `path,label,split,origin` line per record."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("path,label,split,origin\n")
        for r in manifest.records:
            fh.write(f"{r.path},{r.label},{r.split or ''},{r.origin or ''}\n")


def read_manifest_export(path: str) -> list:
    """Parse the audit file back into bare records (no aug seeds)."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if header.strip() != "path,label,split,origin":
            raise InputDataError(f"unexpected manifest header in {path}")
        for line in fh:
            p, label, split, origin = line.rstrip("\n").split(",")
            records.append(
                Record(path=p, label=int(label), split=split or None, origin=origin or None)
            )
    return records
