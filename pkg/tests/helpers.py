"""Independent oracles used across the test suite.

Everything here is deliberately naive (pure loops, brute-force counting,
central finite differences) and shares no code with the library paths it
checks.
"""

import numpy as np


def naive_matmul(a, b):
    """Triple-loop matrix product."""
    a = np.asarray(a)
    b = np.asarray(b)
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.float64)
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            acc = 0.0
            for k in range(a.shape[1]):
                acc += float(a[i, k]) * float(b[k, j])
            out[i, j] = acc
    return out


def naive_conv2d(x, kernels, padding="valid"):
    """Sliding-window convolution oracle, accumulating taps in (a, b, k) order.

    x: (B, H, W, C); kernels: (kh, kw, C, S); stride 1.
    """
    x = np.asarray(x, dtype=np.float64)
    kernels = np.asarray(kernels, dtype=np.float64)
    kh, kw, c, s = kernels.shape
    if padding == "same":
        ph, pw = (kh - 1) // 2, (kw - 1) // 2
        x = np.pad(x, ((0, 0), (ph, ph), (pw, pw), (0, 0)))
    b, h, w, _ = x.shape
    oh, ow = h - kh + 1, w - kw + 1
    out = np.zeros((b, oh, ow, s), dtype=np.float64)
    for bi in range(b):
        for i in range(oh):
            for j in range(ow):
                for si in range(s):
                    acc = 0.0
                    for a in range(kh):
                        for bb in range(kw):
                            for k in range(c):
                                acc += kernels[a, bb, k, si] * x[bi, i + a, j + bb, k]
                    out[bi, i, j, si] = acc
    return out


def naive_maxpool(x, ph, pw):
    """Windowed-max oracle with the floor rule; channels independent."""
    x = np.asarray(x)
    b, h, w, c = x.shape
    oh, ow = h // ph, w // pw
    out = np.empty((b, oh, ow, c), dtype=x.dtype)
    for bi in range(b):
        for i in range(oh):
            for j in range(ow):
                for k in range(c):
                    out[bi, i, j, k] = x[bi, i * ph : (i + 1) * ph, j * pw : (j + 1) * pw, k].max()
    return out


def central_diff(f, x, eps=1e-6):
    """Central finite-difference gradient of scalar f at x, elementwise."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        xp = x.copy()
        xp[idx] += eps
        xm = x.copy()
        xm[idx] -= eps
        grad[idx] = (f(xp) - f(xm)) / (2.0 * eps)
        it.iternext()
    return grad


def max_rel_err(analytic, numeric, floor=1e-8):
    """Max |a - n| / max(floor, |a|, |n|) over all elements."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(floor, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / denom))
