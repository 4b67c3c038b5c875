"""Sigmoid output activation, binary cross-entropy, and the Adam/SGD updates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Clamp applied to predicted probabilities before taking logs; prevents
# -log(0) without measurable bias at 32-bit precision.
EPS_CLAMP = 1e-7


def sigmoid(z: np.ndarray) -> np.ndarray:
    """1 / (1 + exp(-z)), evaluated without overflow for large |z|."""
    z = np.asarray(z)
    out = np.empty_like(z, dtype=z.dtype if z.dtype.kind == "f" else np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class LossValue:
    """Mean binary cross-entropy over a batch plus its gradient wrt the logits."""

    value: float
    grad_wrt_logit: np.ndarray


def bce_loss(y_true: np.ndarray, y_pred: np.ndarray) -> LossValue:
    """Binary cross-entropy -(y log p + (1-y) log(1-p)), averaged over the batch.

    ``y_pred`` are probabilities from the sigmoid output; they are clamped
    into [EPS_CLAMP, 1-EPS_CLAMP] before the logs. The returned gradient is
    taken wrt the pre-sigmoid logit through the fused sigmoid+BCE form,
    (p - y) / batch, which is the numerically stable route.
    """
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred)
    if not np.all((y_true == 0) | (y_true == 1)):
        raise ValueError("labels must be 0 or 1")
    p = np.clip(y_pred.astype(np.float64), EPS_CLAMP, 1.0 - EPS_CLAMP)
    value = float(np.mean(-(y_true * np.log(p) + (1.0 - y_true) * np.log(1.0 - p))))
    grad = ((np.asarray(y_pred, dtype=np.float64) - y_true) / y_true.size).astype(y_pred.dtype)
    return LossValue(value=value, grad_wrt_logit=grad)


@dataclass
class AdamState:
    """Per-parameter Adam state; moment buffers are allocated on first step."""

    eta: float = 0.005
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None
    _scratch: np.ndarray | None = None

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if self.eps <= 0:
            raise ValueError("eps must be positive")


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState) -> np.ndarray:
    """One Adam update; mutates ``params`` in place and advances the state.

    m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2;  bias-corrected m_hat,
    v_hat;  params <- params - eta * m_hat / (sqrt(v_hat) + eps). The update
    is evaluated in the algebraically identical folded form
    eta * sqrt(1-b2^t)/(1-b1^t) * m / (sqrt(v) + eps*sqrt(1-b2^t)) to avoid
    temporaries on multi-megabyte parameters.
    """
    if params.shape != grads.shape:
        raise ValueError(f"shape mismatch: params {params.shape} vs grads {grads.shape}")
    if state.m is None:
        state.m = np.zeros_like(params)
        state.v = np.zeros_like(params)
        state._scratch = np.empty_like(params)
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    s = state._scratch
    np.multiply(grads, grads, out=s)
    np.multiply(s, 1.0 - b2, out=s)
    np.multiply(state.v, b2, out=state.v)
    np.add(state.v, s, out=state.v)
    np.multiply(grads, 1.0 - b1, out=s)
    np.multiply(state.m, b1, out=state.m)
    np.add(state.m, s, out=state.m)
    c1 = 1.0 - b1**state.t
    c2 = np.sqrt(1.0 - b2**state.t)
    np.sqrt(state.v, out=s)
    np.add(s, state.eps * c2, out=s)
    np.divide(state.m, s, out=s)
    np.multiply(s, state.eta * c2 / c1, out=s)
    np.subtract(params, s, out=params)
    return params


@dataclass
class SgdConfig:
    eta: float = 0.005

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("eta must be positive")


def sgd_step(params: np.ndarray, grads: np.ndarray, cfg: SgdConfig) -> np.ndarray:
    """Plain gradient descent: params <- params - eta * grads (in place)."""
    if params.shape != grads.shape:
        raise ValueError(f"shape mismatch: params {params.shape} vs grads {grads.shape}")
    params -= cfg.eta * grads
    return params


class Optimizer:
    """Applies one update rule to a fixed list of parameter arrays."""

    def step(self, params: list, grads: list) -> None:
        raise NotImplementedError


@dataclass
class Adam(Optimizer):
    eta: float = 0.005
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    states: dict = field(default_factory=dict)

    def step(self, params, grads):
        for i, (p, g) in enumerate(zip(params, grads)):
            if i not in self.states:
                self.states[i] = AdamState(eta=self.eta, beta1=self.beta1,
                                           beta2=self.beta2, eps=self.eps)
            adam_step(p, g, self.states[i])


@dataclass
class Sgd(Optimizer):
    eta: float = 0.005

    def step(self, params, grads):
        cfg = SgdConfig(eta=self.eta)
        for p, g in zip(params, grads):
            sgd_step(p, g, cfg)
