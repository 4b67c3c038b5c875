"""Dense tensor primitives shared by every other module.

Tensors are plain numpy arrays in row-major NHWC layout; the helpers here
pin down the contracts the rest of the package relies on (shape checks,
scalar-only broadcasting, deterministic seeded randomness, same-padding).
"""

from __future__ import annotations

import hashlib

import numpy as np

Shape = tuple  # ordered positive integer extents, rank <= 4 in practice
Tensor = np.ndarray
Rng = np.random.Generator


def make_rng(seed: int) -> Rng:
    """Deterministic PCG64 generator for a 64-bit seed."""
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


def derive_seed(seed: int, label: str) -> int:
    """Stable 64-bit subsystem seed hashed from (seed, label).

    SHA-256 of ``"<seed>/<label>"``, low 8 bytes little-endian. Documented so
    runs can be reproduced outside this package.
    """
    digest = hashlib.sha256(f"{int(seed)}/{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def derive_rng(seed: int, label: str) -> Rng:
    return make_rng(derive_seed(seed, label))


def _validate_shape(shape) -> tuple:
    dims = tuple(int(d) for d in shape)
    if len(dims) == 0:
        raise ValueError("shape must have at least one extent")
    for d in dims:
        if d < 1:
            raise ValueError(f"shape extents must be >= 1, got {dims}")
    return dims


def fill(shape, value: float, dtype=np.float32) -> Tensor:
    """Tensor of the given shape with every element equal to ``value``."""
    dims = _validate_shape(shape)
    return np.full(dims, value, dtype=dtype)


def random_tensor(shape, dist, rng: Rng, dtype=np.float32) -> Tensor:
    """I.i.d. random tensor; ``dist`` is ("uniform", a, b) or ("normal", mu, sigma).

    Deterministic for a given generator state: the same seed and call
    sequence reproduce the same values bit for bit.
    """
    dims = _validate_shape(shape)
    kind, p0, p1 = dist
    if kind == "uniform":
        if not p0 < p1:
            raise ValueError(f"uniform bounds require a < b, got a={p0}, b={p1}")
        out = rng.uniform(p0, p1, size=dims)
    elif kind == "normal":
        if not p1 > 0:
            raise ValueError(f"normal requires sigma > 0, got sigma={p1}")
        out = rng.normal(p0, p1, size=dims)
    else:
        raise ValueError(f"unknown distribution {kind!r}")
    return out.astype(dtype)


_ELEMENTWISE_OPS = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
    "max": np.maximum,
}


def elementwise(op: str, a: Tensor, b) -> Tensor:
    """Elementwise combine of two equal-shape tensors, or tensor and scalar.

    No broadcasting beyond scalars. ``scale`` multiplies by a scalar.
    """
    a = np.asarray(a)
    if op == "scale":
        if np.ndim(b) != 0:
            raise ValueError("scale expects a scalar second operand")
        return a * b
    if op not in _ELEMENTWISE_OPS:
        raise ValueError(f"unknown elementwise op {op!r}")
    if np.ndim(b) != 0:
        b = np.asarray(b)
        if b.shape != a.shape:
            raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return _ELEMENTWISE_OPS[op](a, b)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Standard 2-D matrix product with an explicit inner-dimension check."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("matmul expects rank-2 operands")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"inner dimensions disagree: {a.shape} x {b.shape}")
    return a @ b


def pad2d_same(x: Tensor, kernel_h: int, kernel_w: int) -> Tensor:
    """Zero-pad spatial dims so a stride-1 valid convolution preserves H and W.

    Accepts (H, W, C) or (B, H, W, C). Kernel extents must be odd; the pad
    width per side is (kernel - 1) / 2.
    """
    x = np.asarray(x)
    if kernel_h % 2 == 0 or kernel_w % 2 == 0:
        raise ValueError(f"same padding requires odd kernels, got {kernel_h}x{kernel_w}")
    if x.ndim == 3:
        spatial = (0, 1)
    elif x.ndim == 4:
        spatial = (1, 2)
    else:
        raise ValueError(f"expected rank 3 or 4 input, got rank {x.ndim}")
    ph = (kernel_h - 1) // 2
    pw = (kernel_w - 1) // 2
    if ph == 0 and pw == 0:
        return x.copy()
    widths = [(0, 0)] * x.ndim
    widths[spatial[0]] = (ph, ph)
    widths[spatial[1]] = (pw, pw)
    return np.pad(x, widths, mode="constant")
