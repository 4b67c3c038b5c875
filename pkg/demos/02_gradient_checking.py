"""Check every layer's backward pass against central finite differences.

The same idea backs the test suite: perturb one input element at a time,
difference the loss, and compare with the analytic gradient. 64-bit floats
give finite differences enough headroom to resolve 1e-6 discrepancies.

Run: python demos/02_gradient_checking.py
"""

import numpy as np

from lcnn.layers import BatchNorm, Conv2D, Dense
from lcnn.tensor import make_rng

rng = np.random.default_rng(7)


def finite_diff(loss, x, eps=1e-6):
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        xp = x.copy()
        xp[idx] += eps
        xm = x.copy()
        xm[idx] -= eps
        grad[idx] = (loss(xp) - loss(xm)) / (2 * eps)
        it.iternext()
    return grad


def report(name, analytic, numeric):
    err = np.max(np.abs(analytic - numeric) / np.maximum(1e-8, np.abs(numeric)))
    print(f"{name:<22} max relative error {err:.2e}")


# Convolution: gradient with respect to the input.
conv = Conv2D(2, 3, 3, padding="same", rng=make_rng(0), dtype=np.float64)
x = rng.standard_normal((2, 6, 6, 2))
gy = rng.standard_normal(conv.forward(x).shape)
conv.zero_grads()
dx = conv.backward(gy)


def conv_loss(xv):
    c = Conv2D(2, 3, 3, padding="same", rng=make_rng(0), dtype=np.float64)
    return float((c.forward(xv) * gy).sum())


report("conv2d dL/dx", dx, finite_diff(conv_loss, x))

# Dense: gradient with respect to the weights.
dense = Dense(5, 3, rng=make_rng(1), dtype=np.float64)
xd = rng.standard_normal((4, 5))
gd = rng.standard_normal((4, 3))
dense.forward(xd)
dense.zero_grads()
dense.backward(gd)


def dense_loss(wv):
    return float(((xd @ wv + dense.bias) * gd).sum())


report("dense dL/dW", dense.grad_weights, finite_diff(dense_loss, dense.weights))

# Batch norm in training mode: the batch statistics depend on x, and the
# backward pass has to account for that.
bn = BatchNorm(2, dtype=np.float64)
xb = rng.standard_normal((4, 3, 3, 2))
gb = rng.standard_normal((4, 3, 3, 2))
bn.forward(xb, training=True)
bn.zero_grads()
dxb = bn.backward(gb)


def bn_loss(xv):
    b = BatchNorm(2, dtype=np.float64)
    return float((b.forward(xv, training=True) * gb).sum())


report("batchnorm dL/dx", dxb, finite_diff(bn_loss, xb))
