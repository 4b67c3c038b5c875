"""Walk through the tensor helpers and a single conv/pool/dense stack.

Run: python demos/01_tensor_and_layers.py
"""

import numpy as np

from lcnn.layers import Conv2D, Dense, MaxPool2D, ReLU
from lcnn.tensor import fill, make_rng, matmul, pad2d_same, random_tensor

rng = make_rng(42)

# Tensors are plain numpy arrays; the helpers pin down the package contracts.
ones = fill((2, 3), 1.0)
noise = random_tensor((2, 3), ("normal", 0.0, 1.0), rng)
print("fill:\n", ones)
print("seeded noise:\n", noise)
print("matmul:\n", matmul(noise, ones.T))

# Same padding keeps spatial extents under a stride-1 convolution.
img = random_tensor((10, 10, 1), ("uniform", 0.0, 1.0), rng)
print("padded for 9x9 kernel:", pad2d_same(img, 9, 9).shape)

# A miniature feature extractor: conv -> relu -> pool -> dense.
x = random_tensor((4, 12, 12, 1), ("uniform", 0.0, 1.0), rng)
conv = Conv2D(1, 8, 3, padding="same", rng=make_rng(1))
relu = ReLU()
pool = MaxPool2D(2)
out = pool.forward(relu.forward(conv.forward(x)))
print("conv block output:", out.shape)

flat = out.reshape(4, -1)
dense = Dense(flat.shape[1], 1, rng=make_rng(2))
print("logits:", dense.forward(flat).ravel())

# Backward passes mirror the forward chain and fill gradient buffers.
grad = np.ones((4, 1), dtype=np.float32)
g = dense.backward(grad).reshape(out.shape)
g = conv.backward(relu.backward(pool.backward(g)))
print("kernel gradient norm:", float(np.linalg.norm(conv.grad_kernels)))
