"""Desk-scale synthetic dataset: bright-blob detection over textured noise.

Positives contain one randomly placed, rotated ellipse; both classes share
the same smooth background texture and a handful of small bright distractor
dots, so intensity alone does not separate the classes; the coherent extent
of the ellipse does. Distractors cover well under 1% of the pixels, which
keeps every positive's peak intensity above the 99th percentile of its
matched negative.
"""

from __future__ import annotations

import os

import numpy as np
from PIL import Image

from .augment import resize_bilinear
from .errors import InputDataError
from .tensor import Rng, derive_rng

IMAGE_SIZE = 100

BACKGROUND_LO = 0.05
BACKGROUND_HI = 0.50
BLOB_INTENSITY = (0.65, 0.90)
ELLIPSE_AXES_A = (8.0, 15.0)
ELLIPSE_AXES_B = (5.0, 10.0)
DISTRACTOR_COUNT = (2, 6)
DISTRACTOR_RADIUS = (1.0, 1.8)


def _background(rng: Rng, size: int) -> np.ndarray:
    """Smooth texture: coarse uniform noise upsampled bilinearly."""
    coarse = rng.random((8, 8))
    tex = resize_bilinear(coarse, size, size)
    return BACKGROUND_LO + (BACKGROUND_HI - BACKGROUND_LO) * tex


def _soft_disc(size: int, cy: float, cx: float, radius: float, intensity: float) -> np.ndarray:
    rr, cc = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    d = np.sqrt((rr - cy) ** 2 + (cc - cx) ** 2) / radius
    return intensity * np.clip(1.5 - d, 0.0, 1.0)


def _ellipse(size: int, rng: Rng) -> np.ndarray:
    a = rng.uniform(*ELLIPSE_AXES_A)
    b = rng.uniform(*ELLIPSE_AXES_B)
    margin = max(a, b) + 2
    cy = rng.uniform(margin, size - margin)
    cx = rng.uniform(margin, size - margin)
    theta = rng.uniform(0.0, np.pi)
    intensity = rng.uniform(*BLOB_INTENSITY)
    rr, cc = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    dy = rr - cy
    dx = cc - cx
    u = (np.cos(theta) * dy + np.sin(theta) * dx) / a
    v = (-np.sin(theta) * dy + np.cos(theta) * dx) / b
    d = np.sqrt(u * u + v * v)
    # Soft edge: full intensity inside, linear falloff over ~15% of the radius.
    return intensity * np.clip((1.0 - d) / 0.15 + 1.0, 0.0, 1.0)


def _distractors(img: np.ndarray, rng: Rng, size: int) -> np.ndarray:
    count = int(rng.integers(DISTRACTOR_COUNT[0], DISTRACTOR_COUNT[1] + 1))
    for _ in range(count):
        cy = rng.uniform(3, size - 3)
        cx = rng.uniform(3, size - 3)
        radius = rng.uniform(*DISTRACTOR_RADIUS)
        intensity = rng.uniform(*BLOB_INTENSITY)
        img = np.maximum(img, _soft_disc(size, cy, cx, radius, intensity))
    return img


def synth_image(rng: Rng, positive: bool, size: int = IMAGE_SIZE) -> np.ndarray:
    """One synthetic sample in [0, 1]; positive adds the ellipse."""
    img = _background(rng, size)
    img = _distractors(img, rng, size)
    if positive:
        img = np.maximum(img, _ellipse(size, rng))
    return np.clip(img, 0.0, 1.0)


def save_png(img: np.ndarray, path: str) -> None:
    """8-bit grayscale PNG; quantization is round-half-away from float [0, 1]."""
    arr = np.clip(np.asarray(img), 0.0, 1.0)
    Image.fromarray((arr * 255.0 + 0.5).astype(np.uint8), mode="L").save(path, format="PNG")


def generate_dataset(out_dir: str, count: int, seed: int) -> dict:
    """Write a balanced synthetic dataset in the standard directory layout.

    ``count`` is the total number of images, half per class. Returns the
    per-class file lists. Deterministic for a fixed seed.
    """
    if count < 2:
        raise InputDataError(f"count must be >= 2, got {count}")
    per_class = count // 2
    written = {"normal": [], "tumor": []}
    for cls, positive in (("normal", False), ("tumor", True)):
        cls_dir = os.path.join(out_dir, cls)
        os.makedirs(cls_dir, exist_ok=True)
        for i in range(per_class):
            rng = derive_rng(seed, f"synth/{cls}/{i}")
            img = synth_image(rng, positive=positive)
            path = os.path.join(cls_dir, f"{cls[0]}{i:05d}.png")
            save_png(img, path)
            written[cls].append(path)
    return written
