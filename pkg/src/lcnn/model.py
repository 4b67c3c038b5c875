"""Network assembly, forward/backward orchestration and weight files.

The default specification is the low-complexity architecture this package
exists to train: two conv/BN/ReLU/maxpool blocks (32 kernels of 9x9, then
64 of 5x5, both same-padded, pools of 4x4) feeding three dense layers of
4096, 1024 and 1 units with dropout 0.5 between the first two, ending in a
sigmoid. Input is a 100x100 single-channel image; the flatten width is
always computed from the shape trace, never hard-coded.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelConfigError, WeightsError
from .layers import BatchNorm, Conv2D, Dense, Dropout, Flatten, Layer, MaxPool2D, ReLU
from .optim import sigmoid
from .tensor import derive_rng

WEIGHT_MAGIC = b"LCNN"
WEIGHT_VERSION = 1


@dataclass
class ModelSpec:
    """Architecture hyperparameters; defaults give the full-size network.

    ``conv_channels[1]`` (the second conv's kernel count) defaults to 64,
    doubling the first layer's 32.
    """

    input_h: int = 100
    input_w: int = 100
    input_channels: int = 1
    conv_channels: tuple = (32, 64)
    conv_kernels: tuple = (9, 5)
    pool_sizes: tuple = (4, 4)
    dense_units: tuple = (4096, 1024, 1)
    dropout_rate: float = 0.5  # between the first and second dense layers
    batchnorm: bool = True

    def __post_init__(self):
        if not (len(self.conv_channels) == len(self.conv_kernels) == len(self.pool_sizes)):
            raise ModelConfigError("conv_channels, conv_kernels and pool_sizes must align")
        if not self.dense_units or self.dense_units[-1] != 1:
            raise ModelConfigError("the final dense layer must have exactly 1 unit")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ModelConfigError("dropout_rate must lie in [0, 1)")


class Model:
    """Ordered layer stack ending in a single logit; ``forward`` returns
    sigmoid probabilities. ``backward`` expects the gradient wrt that logit
    (the fused sigmoid+BCE form), so no explicit sigmoid layer exists."""

    def __init__(self, spec: ModelSpec, layers: list, seed: int, dtype=np.float32):
        self.spec = spec
        self.layers = layers
        self.seed = seed
        self.dtype = dtype

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        if x.ndim != 4 or x.shape[1:] != (self.spec.input_h, self.spec.input_w, self.spec.input_channels):
            raise ValueError(
                f"expected input (B, {self.spec.input_h}, {self.spec.input_w}, "
                f"{self.spec.input_channels}), got {x.shape}"
            )
        out = x.astype(self.dtype, copy=False)
        for layer in self.layers:
            out = layer.forward(out, training=training)
        return sigmoid(out[:, 0])

    def backward(self, grad_logit: np.ndarray) -> None:
        """Accumulate parameter gradients from the logit gradient.

        The gradient with respect to the network input is not materialized;
        the first layer only accumulates its kernel gradients.
        """
        grad = np.asarray(grad_logit, dtype=self.dtype).reshape(-1, 1)
        first = self.layers[0]
        for layer in reversed(self.layers[1:]):
            grad = layer.backward(grad)
        if isinstance(first, Conv2D):
            first.backward(grad, need_input_grad=False)
        else:
            first.backward(grad)

    def params(self) -> list:
        return [p for layer in self.layers for p in layer.params()]

    def grads(self) -> list:
        return [g for layer in self.layers for g in layer.grads()]

    def zero_grads(self) -> None:
        for layer in self.layers:
            layer.zero_grads()

    def state_entries(self) -> list:
        return [e for layer in self.layers for e in layer.state_entries()]

    def state_snapshot(self) -> dict:
        return {name: arr.copy() for name, arr in self.state_entries()}

    def load_state(self, snapshot: dict) -> None:
        for name, arr in self.state_entries():
            np.copyto(arr, snapshot[name])

    def param_count(self) -> int:
        return sum(p.size for p in self.params())

    def layer_norms(self) -> dict:
        return {
            name: float(np.linalg.norm(arr.astype(np.float64)))
            for name, arr in self.state_entries()
        }


def shape_trace(spec: ModelSpec) -> list:
    """(layer name, output shape) pairs from the input through the final logit.

    Raises ModelConfigError naming the offending layer index if any stage
    cannot produce a valid shape.
    """
    trace = [("input", (spec.input_h, spec.input_w, spec.input_channels))]
    shape = trace[0][1]
    idx = 0
    for i, (channels, kernel, pool) in enumerate(
        zip(spec.conv_channels, spec.conv_kernels, spec.pool_sizes), start=1
    ):
        for name, maker in (
            (f"conv{i}", lambda s: _conv_shape(s, kernel, channels)),
            (f"pool{i}", lambda s: _pool_shape(s, pool)),
        ):
            try:
                shape = maker(shape)
            except ValueError as exc:
                raise ModelConfigError(f"layer {idx} ({name}): {exc}") from exc
            trace.append((name, shape))
            idx += 1
    flat = int(np.prod(shape))
    trace.append(("flatten", (flat,)))
    for j, units in enumerate(spec.dense_units, start=1):
        if units < 1:
            raise ModelConfigError(f"layer {idx} (dense{j}): units must be >= 1")
        trace.append((f"dense{j}", (units,)))
        idx += 1
    return trace


def _conv_shape(shape, kernel, channels):
    h, w, _ = shape
    if kernel % 2 == 0:
        raise ValueError(f"same padding requires an odd kernel, got {kernel}")
    if h < 1 or w < 1:
        raise ValueError(f"empty spatial extent {h}x{w}")
    return (h, w, channels)


def _pool_shape(shape, pool):
    h, w, c = shape
    if pool > h or pool > w:
        raise ValueError(f"pool {pool} larger than input {h}x{w}")
    return (h // pool, w // pool, c)


def build_model(spec: ModelSpec, seed: int = 0, dtype=np.float32,
                conv_method: str = "im2col") -> Model:
    """Instantiate and initialize all layers for ``spec``.

    Weights draw from per-layer generators hashed from (seed, layer name),
    so two builds with the same seed are identical. Conv and dense weights
    use He initialization; batch-norm starts at gamma 1 / beta 0.
    """
    trace = shape_trace(spec)  # validates before any allocation
    layers: list[Layer] = []
    in_c = spec.input_channels
    for i, (channels, kernel, pool) in enumerate(
        zip(spec.conv_channels, spec.conv_kernels, spec.pool_sizes), start=1
    ):
        layers.append(
            Conv2D(in_c, channels, kernel, padding="same",
                   rng=derive_rng(seed, f"init/conv{i}"), dtype=dtype,
                   name=f"conv{i}", method=conv_method)
        )
        if spec.batchnorm:
            layers.append(BatchNorm(channels, dtype=dtype, name=f"bn{i}"))
        layers.append(ReLU(name=f"relu{i}"))
        layers.append(MaxPool2D(pool, name=f"pool{i}"))
        in_c = channels
    layers.append(Flatten())
    fan_in = next(s[0] for name, s in trace if name == "flatten")
    n_dense = len(spec.dense_units)
    for j, units in enumerate(spec.dense_units, start=1):
        layers.append(
            Dense(fan_in, units, rng=derive_rng(seed, f"init/dense{j}"),
                  dtype=dtype, name=f"dense{j}")
        )
        last = j == n_dense
        if not last:
            layers.append(ReLU(name=f"relu_dense{j}"))
            if j == 1 and spec.dropout_rate > 0.0 and n_dense >= 2:
                layers.append(
                    Dropout(spec.dropout_rate, rng=derive_rng(seed, "dropout"),
                            name="dropout")
                )
        fan_in = units
    return Model(spec, layers, seed=seed, dtype=dtype)


def save_weights(model: Model, path: str) -> None:
    """Binary weight file: magic `LCNN`, version, entry count, then per entry
    name length + utf-8 name, rank, extents, little-endian float32 data.

    Batch-norm running statistics are included so eval-mode forwards
    round-trip bit-exactly.
    """
    entries = model.state_entries()
    with open(path, "wb") as fh:
        fh.write(WEIGHT_MAGIC)
        fh.write(struct.pack("<II", WEIGHT_VERSION, len(entries)))
        for name, arr in entries:
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def _read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise WeightsError(f"truncated weight file while reading {what}")
    return buf


def load_weights(path: str, spec: ModelSpec | None = None, dtype=np.float32) -> Model:
    """Rebuild a model from ``spec`` (default architecture if omitted) and
    fill it from a weight file, validating every entry's name and shape."""
    spec = spec if spec is not None else ModelSpec()
    model = build_model(spec, seed=0, dtype=dtype)
    expected = dict(model.state_entries())
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise WeightsError(f"cannot open weight file {path}: {exc}") from exc
    with fh:
        if _read_exact(fh, 4, "magic") != WEIGHT_MAGIC:
            raise WeightsError(f"{path} is not a weight file (bad magic)")
        version, count = struct.unpack("<II", _read_exact(fh, 8, "header"))
        if version != WEIGHT_VERSION:
            raise WeightsError(f"unsupported weight format version {version}")
        seen = set()
        for _ in range(count):
            (name_len,) = struct.unpack("<I", _read_exact(fh, 4, "entry name length"))
            name = _read_exact(fh, name_len, "entry name").decode("utf-8")
            (rank,) = struct.unpack("<I", _read_exact(fh, 4, f"{name} rank"))
            shape = struct.unpack(f"<{rank}I", _read_exact(fh, 4 * rank, f"{name} extents"))
            data = _read_exact(fh, 4 * int(np.prod(shape)), f"{name} data")
            if name not in expected:
                raise WeightsError(f"unexpected entry {name!r} for this architecture")
            target = expected[name]
            if tuple(shape) != target.shape:
                raise WeightsError(
                    f"shape mismatch for {name}: file has {tuple(shape)}, "
                    f"model expects {target.shape}"
                )
            values = np.frombuffer(data, dtype="<f4").reshape(shape)
            np.copyto(target, values.astype(dtype))
            seen.add(name)
        if fh.read(1):
            raise WeightsError(f"trailing bytes after {count} entries in {path}")
    missing = set(expected) - seen
    if missing:
        raise WeightsError(f"weight file is missing entries: {sorted(missing)}")
    return model
