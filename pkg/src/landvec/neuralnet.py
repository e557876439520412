"""Minimal dense network: forward pass, reverse-mode gradients and Adam.

Layers store ``W`` as ``out x in``.  Inputs may be a single vector or a
batch (rows are examples); gradients are accumulated over the batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import CacheMismatchError, DimensionError, DivergenceError

ACTIVATIONS = ("identity", "relu", "sigmoid")


@dataclass(eq=False)
class DenseLayer:
    W: np.ndarray
    b: np.ndarray
    activation: str = "identity"

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise DimensionError(f"inconsistent layer shapes W{self.W.shape} b{self.b.shape}")

    @property
    def in_dim(self) -> int:
        return self.W.shape[1]

    @property
    def out_dim(self) -> int:
        return self.W.shape[0]

    @classmethod
    def init(cls, in_dim: int, out_dim: int, activation: str, rng: np.random.Generator):
        """Glorot-uniform weights, zero biases."""
        limit = np.sqrt(6.0 / (in_dim + out_dim))
        return cls(rng.uniform(-limit, limit, size=(out_dim, in_dim)), np.zeros(out_dim), activation)

    def params(self) -> list[np.ndarray]:
        return [self.W, self.b]

    def copy(self) -> DenseLayer:
        return DenseLayer(self.W.copy(), self.b.copy(), self.activation)


def _activate(kind: str, pre: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return np.maximum(pre, 0.0)
    if kind == "sigmoid":
        return expit(pre)
    return pre


def _activation_grad(kind: str, out: np.ndarray, grad: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return grad * (out > 0.0)  # subgradient 0 at the kink
    if kind == "sigmoid":
        return grad * out * (1.0 - out)
    return grad


@dataclass
class ForwardCache:
    signature: tuple
    inputs: list[np.ndarray]
    outputs: list[np.ndarray]
    single: bool


@dataclass
class GradientTape:
    dW: list[np.ndarray]
    db: list[np.ndarray]
    input_grad: np.ndarray

    def grads(self) -> list[np.ndarray]:
        out = []
        for gw, gb in zip(self.dW, self.db):
            out += [gw, gb]
        return out


def _signature(layers) -> tuple:
    return tuple((id(layer), layer.W.shape) for layer in layers)


def forward(layers, x) -> tuple[np.ndarray, ForwardCache]:
    a = np.asarray(x, dtype=np.float64)
    single = a.ndim == 1
    if single:
        a = a[None, :]
    if not layers:
        return (a[0] if single else a), ForwardCache((), [], [], single)
    if a.ndim != 2 or a.shape[1] != layers[0].in_dim:
        raise DimensionError(f"input of width {a.shape[-1]} fed to layer expecting {layers[0].in_dim}")
    inputs, outputs = [], []
    for layer in layers:
        if a.shape[1] != layer.in_dim:
            raise DimensionError(f"layer expects {layer.in_dim} inputs, got {a.shape[1]}")
        inputs.append(a)
        a = _activate(layer.activation, a @ layer.W.T + layer.b)
        outputs.append(a)
    cache = ForwardCache(_signature(layers), inputs, outputs, single)
    return (a[0] if single else a), cache


def backward(layers, cache: ForwardCache, output_gradient) -> GradientTape:
    """Gradients of a scalar loss given ``dLoss/dOutput`` for the cached forward pass."""
    if cache.signature != _signature(layers):
        raise CacheMismatchError("forward cache was produced by a different network")
    g = np.asarray(output_gradient, dtype=np.float64)
    if cache.single:
        g = g[None, :]
    if layers and g.shape != cache.outputs[-1].shape:
        raise DimensionError(f"output gradient shape {g.shape} != output {cache.outputs[-1].shape}")
    dW: list[np.ndarray] = [None] * len(layers)  # type: ignore[list-item]
    db: list[np.ndarray] = [None] * len(layers)  # type: ignore[list-item]
    for i in range(len(layers) - 1, -1, -1):
        layer = layers[i]
        g = _activation_grad(layer.activation, cache.outputs[i], g)
        dW[i] = g.T @ cache.inputs[i]
        db[i] = g.sum(axis=0)
        g = g @ layer.W
    return GradientTape(dW, db, g[0] if cache.single else g)


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState):
    """One bias-corrected Adam update, applied to ``params`` in place."""
    if len(params) != len(grads):
        raise DimensionError("parameter and gradient lists differ in length")
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise DimensionError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise DivergenceError("non-finite gradient")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state
