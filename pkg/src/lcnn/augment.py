"""Image augmentation pipeline for single-channel images in [0, 1].

Stages, applied in this order by ``augment_sample``: Gaussian blur, color
jitter (brightness/contrast), rotation, translation, zoom, automatic crop
of black borders, and a final resize to the network input size. Every
transform returns a new array with pixels clamped back into [0, 1]. Hue is
not jittered: the inputs are grayscale, where hue is undefined; brightness
and contrast carry the same intent.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .tensor import Rng

ImageBuffer = np.ndarray  # (H, W) float array, values in [0, 1]

DEFAULT_OUT_SIZE = (100, 100)


@dataclass
class AugmentConfig:
    """Sampling ranges for one augmented draw. Defaults are conservative,
    label-preserving magnitudes; all configurable."""

    blur_sigma_range: tuple = (0.0, 1.5)
    brightness_delta: float = 0.1
    contrast_range: tuple = (0.8, 1.2)
    rotation_max_deg: float = 15.0
    translate_max_frac: float = 0.10
    zoom_range: tuple = (0.9, 1.15)
    autocrop_threshold: float = 0.02
    seed: int = 0

    def __post_init__(self):
        for lo, hi in (self.blur_sigma_range, self.contrast_range, self.zoom_range):
            if lo > hi:
                raise ValueError("range bounds must satisfy lo <= hi")
        if self.blur_sigma_range[0] < 0:
            raise ValueError("blur sigma must be >= 0")
        if self.contrast_range[0] <= 0 or self.zoom_range[0] <= 0:
            raise ValueError("contrast and zoom must be positive")
        if self.rotation_max_deg < 0:
            raise ValueError("rotation_max_deg must be >= 0")
        if not 0.0 <= self.translate_max_frac < 1.0:
            raise ValueError("translate_max_frac must lie in [0, 1)")
        if not 0.0 <= self.autocrop_threshold < 1.0:
            raise ValueError("autocrop_threshold must lie in [0, 1)")


def _clamp(img: np.ndarray) -> np.ndarray:
    return np.clip(img, 0.0, 1.0)


def gaussian_kernel_1d(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian sampled at integer offsets, radius ceil(2*sigma)."""
    radius = int(np.ceil(2.0 * sigma))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(xs * xs) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_blur(img: ImageBuffer, sigma: float) -> ImageBuffer:
    """Separable Gaussian blur; sigma 0 is the identity. Borders replicate edges."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    img = np.asarray(img, dtype=np.float64)
    if sigma == 0.0:
        return img.copy()
    k = gaussian_kernel_1d(sigma)
    r = (len(k) - 1) // 2
    padded = np.pad(img, ((r, r), (0, 0)), mode="edge")
    rows = sum(w * padded[i : i + img.shape[0], :] for i, w in enumerate(k))
    padded = np.pad(rows, ((0, 0), (r, r)), mode="edge")
    out = sum(w * padded[:, j : j + img.shape[1]] for j, w in enumerate(k))
    return _clamp(out)


def color_jitter(img: ImageBuffer, brightness: float, contrast: float) -> ImageBuffer:
    """Mean-anchored contrast scaling followed by an additive brightness shift."""
    if contrast <= 0:
        raise ValueError("contrast must be positive")
    img = np.asarray(img, dtype=np.float64)
    mean = img.mean()
    return _clamp(contrast * (img - mean) + mean + brightness)


def _bilinear_sample(img: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Sample ``img`` at fractional (row, col) coordinates; outside pixels read 0."""
    h, w = img.shape
    r0 = np.floor(rows).astype(np.int64)
    c0 = np.floor(cols).astype(np.int64)
    fr = rows - r0
    fc = cols - c0

    def at(r, c):
        inside = (r >= 0) & (r < h) & (c >= 0) & (c < w)
        v = img[np.clip(r, 0, h - 1), np.clip(c, 0, w - 1)]
        return np.where(inside, v, 0.0)

    top = at(r0, c0) * (1 - fc) + at(r0, c0 + 1) * fc
    bot = at(r0 + 1, c0) * (1 - fc) + at(r0 + 1, c0 + 1) * fc
    return top * (1 - fr) + bot * fr


def rotate(img: ImageBuffer, degrees: float) -> ImageBuffer:
    """Rotate counterclockwise about the image center with bilinear interpolation.

    Samples that fall outside the frame are black; the output keeps the
    input dimensions.
    """
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    theta = np.deg2rad(degrees)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    rr, cc = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    dy = rr - cy
    dx = cc - cx
    # Inverse map: rotate the output grid by -theta back into source coords.
    # Rows grow downward, so the sign convention below makes positive angles
    # counterclockwise to a viewer.
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    src_r = cy + cos_t * dy + sin_t * dx
    src_c = cx - sin_t * dy + cos_t * dx
    return _clamp(_bilinear_sample(img, src_r, src_c))


def translate(img: ImageBuffer, dx: int, dy: int) -> ImageBuffer:
    """Shift content by (dx, dy) in (column, row) direction; vacated pixels are 0."""
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    if abs(dx) >= w or abs(dy) >= h:
        raise ValueError(f"shift ({dx}, {dy}) must be smaller than the image extent {w}x{h}")
    out = np.zeros_like(img)
    src_r = slice(max(0, -dy), min(h, h - dy))
    dst_r = slice(max(0, dy), min(h, h + dy))
    src_c = slice(max(0, -dx), min(w, w - dx))
    dst_c = slice(max(0, dx), min(w, w + dx))
    out[dst_r, dst_c] = img[src_r, src_c]
    return out


def resize_bilinear(img: ImageBuffer, out_h: int, out_w: int) -> ImageBuffer:
    """Bilinear resample to (out_h, out_w) using half-pixel centers, edge clamped."""
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    if (out_h, out_w) == (h, w):
        return img.copy()
    rows = (np.arange(out_h) + 0.5) * h / out_h - 0.5
    cols = (np.arange(out_w) + 0.5) * w / out_w - 0.5
    rr, cc = np.meshgrid(np.clip(rows, 0, h - 1), np.clip(cols, 0, w - 1), indexing="ij")
    return _clamp(_bilinear_sample(img, rr, cc))


def zoom_resize(img: ImageBuffer, scale: float, out_h: int, out_w: int) -> ImageBuffer:
    """Zoom by ``scale`` then resample to (out_h, out_w).

    scale > 1 crops the central 1/scale fraction (zoom in); scale < 1 pads a
    black border so the content shrinks (zoom out).
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    if scale != 1.0:
        nh = max(1, int(round(h / scale)))
        nw = max(1, int(round(w / scale)))
        if scale > 1.0:
            top = (h - nh) // 2
            left = (w - nw) // 2
            img = img[top : top + nh, left : left + nw]
        else:
            canvas = np.zeros((nh, nw), dtype=img.dtype)
            top = (nh - h) // 2
            left = (nw - w) // 2
            canvas[top : top + h, left : left + w] = img
            img = canvas
    return resize_bilinear(img, out_h, out_w)


def autocrop_black(img: ImageBuffer, threshold: float = 0.02) -> ImageBuffer:
    """Tight bounding box of pixels brighter than ``threshold``.

    An image with no pixel above the threshold is returned unchanged with a
    warning rather than cropped to nothing.
    """
    if not 0.0 <= threshold < 1.0:
        raise ValueError("threshold must lie in [0, 1)")
    img = np.asarray(img, dtype=np.float64)
    mask = img > threshold
    row_any = mask.any(axis=1)
    if not row_any.any():
        warnings.warn("autocrop_black: no pixel above threshold, image left unchanged")
        return img.copy()
    col_any = mask.any(axis=0)
    r0, r1 = np.flatnonzero(row_any)[[0, -1]]
    c0, c1 = np.flatnonzero(col_any)[[0, -1]]
    return img[r0 : r1 + 1, c0 : c1 + 1].copy()


@dataclass
class AugmentParams:
    """One concrete draw from an AugmentConfig."""

    sigma: float
    brightness: float
    contrast: float
    degrees: float
    dx: int
    dy: int
    scale: float


def draw_params(cfg: AugmentConfig, rng: Rng, image_shape: tuple) -> AugmentParams:
    """Sample one set of augmentation magnitudes; draw order is fixed."""
    h, w = image_shape
    sigma = float(rng.uniform(*cfg.blur_sigma_range))
    brightness = float(rng.uniform(-cfg.brightness_delta, cfg.brightness_delta))
    contrast = float(rng.uniform(*cfg.contrast_range))
    degrees = float(rng.uniform(-cfg.rotation_max_deg, cfg.rotation_max_deg))
    max_dx = int(cfg.translate_max_frac * w)
    max_dy = int(cfg.translate_max_frac * h)
    dx = int(rng.integers(-max_dx, max_dx + 1))
    dy = int(rng.integers(-max_dy, max_dy + 1))
    scale = float(rng.uniform(*cfg.zoom_range))
    return AugmentParams(sigma, brightness, contrast, degrees, dx, dy, scale)


def apply_params(
    img: ImageBuffer,
    params: AugmentParams,
    threshold: float = 0.02,
    out_size: tuple = DEFAULT_OUT_SIZE,
) -> ImageBuffer:
    """Run the full pipeline with fixed magnitudes, ending in autocrop + resize."""
    img = gaussian_blur(img, params.sigma)
    img = color_jitter(img, params.brightness, params.contrast)
    img = rotate(img, params.degrees)
    img = translate(img, params.dx, params.dy)
    img = zoom_resize(img, params.scale, img.shape[0], img.shape[1])
    img = autocrop_black(img, threshold)
    return resize_bilinear(img, *out_size)


def augment_sample(img: ImageBuffer, cfg: AugmentConfig, rng: Rng,
                   out_size: tuple = DEFAULT_OUT_SIZE) -> ImageBuffer:
    """One random augmented variant of ``img``; deterministic given the rng seed."""
    params = draw_params(cfg, rng, np.asarray(img).shape)
    return apply_params(img, params, cfg.autocrop_threshold, out_size)
