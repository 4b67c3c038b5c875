"""Forward and backward passes for every layer in the network.

All activations are NHWC (batch, height, width, channel) numpy arrays.
Each layer caches whatever its backward pass needs during forward; grads
accumulate into per-parameter buffers that the optimizer consumes and the
caller clears via ``zero_grads``. A layer instance is not thread-safe.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Rng, make_rng, pad2d_same


class Layer:
    """Base layer. ``params``/``grads`` are aligned lists of numpy arrays."""

    name = "layer"

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> list:
        return []

    def grads(self) -> list:
        return []

    def state_entries(self) -> list:
        """(name, array) pairs to serialize; includes non-trainable state."""
        return []

    def zero_grads(self) -> None:
        for g in self.grads():
            g[...] = 0.0

    def output_shape(self, in_shape: tuple) -> tuple:
        """Spatial shape bookkeeping for (H, W, C) inputs, batch excluded."""
        return in_shape


def _im2col(xp: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """Patch matrix (B, oh, ow, kh*kw*C) from a padded NHWC input, stride 1."""
    windows = sliding_window_view(xp, (kh, kw), axis=(1, 2))  # (B, oh, ow, C, kh, kw)
    windows = windows.transpose(0, 1, 2, 4, 5, 3)  # (B, oh, ow, kh, kw, C)
    b, oh, ow = windows.shape[:3]
    return windows.reshape(b, oh, ow, kh * kw * xp.shape[3])


class Conv2D(Layer):
    """Stride-1 2-D convolution with a bank of trainable kernels, no bias.

    Kernels are (kh, kw, in_channels, out_channels). Same padding keeps the
    spatial extents; valid mode shrinks them to H-kh+1 x W-kw+1. Same padding
    requires odd kernels; valid mode accepts any extent. The shift a bias
    would provide is absorbed by the batch-norm beta that follows each conv.

    ``method`` selects the production im2col+matmul path or the direct
    sliding-window reference path; both compute the same sums.
    """

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_h: int,
        kernel_w: int | None = None,
        padding: str = "same",
        rng: Rng | None = None,
        dtype=np.float32,
        name: str = "conv",
        method: str = "im2col",
    ):
        kernel_w = kernel_h if kernel_w is None else kernel_w
        if padding not in ("same", "valid"):
            raise ValueError(f"padding must be 'same' or 'valid', got {padding!r}")
        if padding == "same" and (kernel_h % 2 == 0 or kernel_w % 2 == 0):
            raise ValueError("same padding requires odd kernel extents")
        if out_channels < 1 or in_channels < 1:
            raise ValueError("channel counts must be >= 1")
        if method not in ("im2col", "direct"):
            raise ValueError(f"unknown conv method {method!r}")
        self.name = name
        self.padding = padding
        self.kh = kernel_h
        self.kw = kernel_w
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.method = method
        rng = rng if rng is not None else make_rng(0)
        fan_in = kernel_h * kernel_w * in_channels
        std = np.sqrt(2.0 / fan_in)  # He init for the ReLU that follows
        self.kernels = rng.normal(0.0, std, size=(kernel_h, kernel_w, in_channels, out_channels)).astype(dtype)
        self.grad_kernels = np.zeros_like(self.kernels)
        self._cols = None
        self._in_shape = None

    def _pad(self, x: np.ndarray) -> np.ndarray:
        if self.padding == "same":
            return pad2d_same(x, self.kh, self.kw)
        return x

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        if x.ndim != 4:
            raise ValueError(f"expected NHWC input, got rank {x.ndim}")
        if x.shape[3] != self.in_channels:
            raise ValueError(
                f"{self.name}: input has {x.shape[3]} channels, kernels expect {self.in_channels}"
            )
        xp = self._pad(x)
        if xp.shape[1] < self.kh or xp.shape[2] < self.kw:
            raise ValueError(f"{self.name}: kernel larger than (padded) input")
        self._in_shape = x.shape
        if self.method == "direct":
            return self._forward_direct(xp)
        cols = _im2col(xp, self.kh, self.kw)
        b, oh, ow = cols.shape[:3]
        self._cols = cols.reshape(b * oh * ow, -1)
        y = self._cols @ self.kernels.reshape(-1, self.out_channels)
        return y.reshape(b, oh, ow, self.out_channels)

    def _forward_direct(self, xp: np.ndarray) -> np.ndarray:
        # Reference path: accumulates one (a, b, k) tap at a time so the
        # summation order matches an elementwise sliding-window evaluation.
        self._xp = xp
        b = xp.shape[0]
        oh = xp.shape[1] - self.kh + 1
        ow = xp.shape[2] - self.kw + 1
        y = np.zeros((b, oh, ow, self.out_channels), dtype=xp.dtype)
        for a in range(self.kh):
            for bb in range(self.kw):
                for k in range(self.in_channels):
                    patch = xp[:, a : a + oh, bb : bb + ow, k]
                    y += patch[..., None] * self.kernels[a, bb, k]
        return y

    def backward(self, grad_out: np.ndarray, need_input_grad: bool = True) -> np.ndarray | None:
        if self._in_shape is None:
            raise RuntimeError(f"{self.name}: backward called before forward")
        if self.method == "direct":
            return self._backward_direct(grad_out, need_input_grad)
        b, h, w, _ = self._in_shape
        oh, ow = grad_out.shape[1], grad_out.shape[2]
        g = grad_out.reshape(b * oh * ow, self.out_channels)
        self.grad_kernels += (self._cols.T @ g).reshape(self.kernels.shape)
        if not need_input_grad:
            return None
        # Channel-major patch gradients keep each (c, a, b) plane contiguous
        # so the scatter-add below walks memory linearly.
        w_cm = self.kernels.transpose(2, 0, 1, 3).reshape(-1, self.out_channels)
        dcols = (w_cm @ g.T).reshape(self.in_channels, self.kh, self.kw, b, oh, ow)
        ph = (self.kh - 1) // 2 if self.padding == "same" else 0
        pw = (self.kw - 1) // 2 if self.padding == "same" else 0
        dxp = np.zeros((self.in_channels, b, h + 2 * ph, w + 2 * pw), dtype=grad_out.dtype)
        for a in range(self.kh):
            for bb in range(self.kw):
                dxp[:, :, a : a + oh, bb : bb + ow] += dcols[:, a, bb]
        dx = dxp[:, :, ph : ph + h, pw : pw + w]
        return np.ascontiguousarray(dx.transpose(1, 2, 3, 0))

    def _backward_direct(self, grad_out: np.ndarray, need_input_grad: bool = True) -> np.ndarray | None:
        xp = self._xp
        b, h, w, _ = self._in_shape
        oh, ow = grad_out.shape[1], grad_out.shape[2]
        dxp = np.zeros_like(xp)
        for a in range(self.kh):
            for bb in range(self.kw):
                for k in range(self.in_channels):
                    patch = xp[:, a : a + oh, bb : bb + ow, k]
                    self.grad_kernels[a, bb, k] += np.einsum("bij,bijs->s", patch, grad_out)
                    dxp[:, a : a + oh, bb : bb + ow, k] += grad_out @ self.kernels[a, bb, k]
        if not need_input_grad:
            return None
        if self.padding == "same":
            ph, pw = (self.kh - 1) // 2, (self.kw - 1) // 2
            return dxp[:, ph : ph + h, pw : pw + w, :]
        return dxp

    def params(self):
        return [self.kernels]

    def grads(self):
        return [self.grad_kernels]

    def state_entries(self):
        return [(f"{self.name}.kernels", self.kernels)]

    def output_shape(self, in_shape):
        h, w, c = in_shape
        if c != self.in_channels:
            raise ValueError(f"{self.name}: expects {self.in_channels} channels, got {c}")
        if self.padding == "same":
            return (h, w, self.out_channels)
        if h < self.kh or w < self.kw:
            raise ValueError(f"{self.name}: kernel larger than input {h}x{w}")
        return (h - self.kh + 1, w - self.kw + 1, self.out_channels)


class MaxPool2D(Layer):
    """Non-overlapping windowed max; stride equals the window extent.

    Output extents follow the floor rule: trailing rows/columns that do not
    fill a window are dropped. Channels pass through independently. Ties go
    to the first maximal cell in row-major window order.
    """

    def __init__(self, pool_h: int, pool_w: int | None = None, name: str = "pool"):
        pool_w = pool_h if pool_w is None else pool_w
        if pool_h < 1 or pool_w < 1:
            raise ValueError("pool extents must be >= 1")
        self.name = name
        self.ph = pool_h
        self.pw = pool_w
        self._argmax = None
        self._in_shape = None

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        b, h, w, c = x.shape
        if self.ph > h or self.pw > w:
            raise ValueError(f"{self.name}: pool {self.ph}x{self.pw} larger than input {h}x{w}")
        oh, ow = h // self.ph, w // self.pw
        xc = x[:, : oh * self.ph, : ow * self.pw, :]
        win = xc.reshape(b, oh, self.ph, ow, self.pw, c)
        win = win.transpose(0, 1, 3, 2, 4, 5).reshape(b, oh, ow, self.ph * self.pw, c)
        self._argmax = win.argmax(axis=3)
        self._in_shape = x.shape
        out = np.take_along_axis(win, self._argmax[:, :, :, None, :], axis=3)
        return out[:, :, :, 0, :]

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._argmax is None:
            raise RuntimeError(f"{self.name}: backward called before forward")
        b, h, w, c = self._in_shape
        oh, ow = grad_out.shape[1], grad_out.shape[2]
        dwin = np.zeros((b, oh, ow, self.ph * self.pw, c), dtype=grad_out.dtype)
        np.put_along_axis(dwin, self._argmax[:, :, :, None, :], grad_out[:, :, :, None, :], axis=3)
        dxc = dwin.reshape(b, oh, ow, self.ph, self.pw, c)
        dxc = dxc.transpose(0, 1, 3, 2, 4, 5).reshape(b, oh * self.ph, ow * self.pw, c)
        if (oh * self.ph, ow * self.pw) == (h, w):
            return dxc
        dx = np.zeros(self._in_shape, dtype=grad_out.dtype)
        dx[:, : oh * self.ph, : ow * self.pw, :] = dxc
        return dx

    def output_shape(self, in_shape):
        h, w, c = in_shape
        if self.ph > h or self.pw > w:
            raise ValueError(f"{self.name}: pool {self.ph}x{self.pw} larger than input {h}x{w}")
        return (h // self.ph, w // self.pw, c)


class ReLU(Layer):
    """max(0, x); the subgradient at exactly 0 is taken as 0."""

    def __init__(self, name: str = "relu"):
        self.name = name
        self._out = None

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        # out > 0 iff x > 0, so the output doubles as the backward cache.
        self._out = np.maximum(x, 0)
        return self._out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._out is None:
            raise RuntimeError(f"{self.name}: backward called before forward")
        return grad_out * (self._out > 0)


class BatchNorm(Layer):
    """Per-channel standardization with trainable scale/shift.

    Training mode standardizes with batch statistics over all non-channel
    axes and updates running statistics with the given momentum; eval mode
    uses the running statistics only. Variances are biased (divide by N).
    """

    def __init__(self, channels: int, momentum: float = 0.9, eps: float = 1e-5,
                 dtype=np.float32, name: str = "bn"):
        if not 0.0 < momentum < 1.0:
            raise ValueError("momentum must lie in (0, 1)")
        if eps <= 0:
            raise ValueError("eps must be positive")
        self.name = name
        self.momentum = momentum
        self.eps = eps
        self.gamma = np.ones(channels, dtype=dtype)
        self.beta = np.zeros(channels, dtype=dtype)
        self.grad_gamma = np.zeros_like(self.gamma)
        self.grad_beta = np.zeros_like(self.beta)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self._cache = None

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        c = self.gamma.shape[0]
        if x.shape[-1] != c:
            raise ValueError(f"{self.name}: channel mismatch")
        if training:
            if x.shape[0] < 2:
                raise ValueError(f"{self.name}: batch size must be >= 2 in training mode")
            axes = tuple(range(x.ndim - 1))
            mean = x.mean(axis=axes)
            xhat = x - mean
            flat = xhat.reshape(-1, c)
            var = np.einsum("nc,nc->c", flat, flat) / flat.shape[0]
            m = self.momentum
            self.running_mean[...] = m * self.running_mean + (1.0 - m) * mean
            self.running_var[...] = m * self.running_var + (1.0 - m) * var
            inv_std = 1.0 / np.sqrt(var + self.eps)
            xhat *= inv_std
            self._cache = (xhat, inv_std, True)
            out = xhat * self.gamma
            out += self.beta
            return out
        # Eval: a fixed per-channel affine map; xhat is rebuilt lazily if a
        # backward pass ever needs it.
        inv_std = 1.0 / np.sqrt(self.running_var + self.eps)
        scale = self.gamma * inv_std
        out = x * scale
        out += self.beta - self.running_mean * scale
        self._cache = (x, inv_std, False)
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise RuntimeError(f"{self.name}: backward called before forward")
        xhat, inv_std, was_training = self._cache
        if not was_training:
            xhat = (xhat - self.running_mean) * inv_std  # cache held x itself
        c = self.gamma.shape[0]
        flat_g = grad_out.reshape(-1, c)
        sum_dy = flat_g.sum(axis=0)
        sum_dy_xhat = np.einsum("nc,nc->c", flat_g, xhat.reshape(-1, c))
        self.grad_gamma += sum_dy_xhat
        self.grad_beta += sum_dy
        if not was_training:
            # Running statistics are constants in eval mode.
            return grad_out * (self.gamma * inv_std)
        # Batch statistics depend on x; the standard reduced form of the
        # gradient through mean and (biased) variance:
        n = flat_g.shape[0]
        dx = grad_out - sum_dy / n
        dx -= xhat * (sum_dy_xhat / n)
        dx *= self.gamma * inv_std
        return dx

    def params(self):
        return [self.gamma, self.beta]

    def grads(self):
        return [self.grad_gamma, self.grad_beta]

    def state_entries(self):
        return [
            (f"{self.name}.gamma", self.gamma),
            (f"{self.name}.beta", self.beta),
            (f"{self.name}.running_mean", self.running_mean),
            (f"{self.name}.running_var", self.running_var),
        ]


class Dense(Layer):
    """Affine layer y = x W + b with weights (fan_in, fan_out)."""

    def __init__(self, fan_in: int, fan_out: int, rng: Rng | None = None,
                 dtype=np.float32, name: str = "dense"):
        if fan_in < 1 or fan_out < 1:
            raise ValueError("fan_in and fan_out must be >= 1")
        self.name = name
        rng = rng if rng is not None else make_rng(0)
        std = np.sqrt(2.0 / fan_in)
        self.weights = rng.normal(0.0, std, size=(fan_in, fan_out)).astype(dtype)
        self.bias = np.zeros(fan_out, dtype=dtype)
        self.grad_weights = np.zeros_like(self.weights)
        self.grad_bias = np.zeros_like(self.bias)
        self._x = None

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.weights.shape[0]:
            raise ValueError(
                f"{self.name}: expected (B, {self.weights.shape[0]}) input, got {x.shape}"
            )
        self._x = x
        return x @ self.weights + self.bias

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._x is None:
            raise RuntimeError(f"{self.name}: backward called before forward")
        self.grad_weights += self._x.T @ grad_out
        self.grad_bias += grad_out.sum(axis=0)
        return grad_out @ self.weights.T

    def params(self):
        return [self.weights, self.bias]

    def grads(self):
        return [self.grad_weights, self.grad_bias]

    def state_entries(self):
        return [(f"{self.name}.weights", self.weights), (f"{self.name}.bias", self.bias)]

    def output_shape(self, in_shape):
        return (self.weights.shape[1],)


class Dropout(Layer):
    """Inverted dropout: zero with probability ``rate``, scale survivors by 1/(1-rate).

    Eval mode is the identity. The mask is drawn from the layer's own
    generator so a fixed seed reproduces the exact same masks.
    """

    def __init__(self, rate: float, rng: Rng | None = None, name: str = "dropout"):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
        self.name = name
        self.rate = rate
        self.rng = rng if rng is not None else make_rng(0)
        self._mask = None

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        if not training or self.rate == 0.0:
            self._mask = None
            return x
        keep = 1.0 - self.rate
        self._mask = (self.rng.random(x.shape) >= self.rate).astype(x.dtype) / keep
        return x * self._mask

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._mask is None:
            return grad_out
        return grad_out * self._mask


class Flatten(Layer):
    """(B, H, W, C) -> (B, H*W*C) in row-major order."""

    def __init__(self, name: str = "flatten"):
        self.name = name
        self._in_shape = None

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        self._in_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._in_shape is None:
            raise RuntimeError(f"{self.name}: backward called before forward")
        return grad_out.reshape(self._in_shape)

    def output_shape(self, in_shape):
        n = 1
        for d in in_shape:
            n *= d
        return (n,)
