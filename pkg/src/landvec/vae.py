"""Autoencoder / variational autoencoder over normalized landscape vectors.

Architecture for input size ``n`` and latent size ``ls``::

    encoder  n -> n/2 -> n/4          (relu)
    heads    n/4 -> ls                (identity; mean, plus log-variance for vae)
    decoder  ls -> n/4 -> n/2 -> n    (relu, relu, sigmoid)

``sigma`` in this module is always the log variance, so the sampling step is
``z = mu + exp(sigma / 2) * eps``.  Per-example loss is
``beta * KL + sum of squared errors``; batches are averaged.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DivergenceError, EmptyDatasetError, UsageError
from .neuralnet import AdamState, DenseLayer, adam_step, backward, forward
from .sampling import LandscapeVector

log = logging.getLogger(__name__)

KINDS = ("ae", "vae")


def loss_kl(mu, sigma) -> float:
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    return float(0.5 * np.sum(np.exp(sigma) - (1.0 + sigma) + mu**2))


def loss_mse(x, x_hat) -> float:
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise DimensionError(f"shape mismatch {x.shape} vs {x_hat.shape}")
    return float(np.sum((x - x_hat) ** 2))


def loss_vae(x, x_hat, mu, sigma, beta: float) -> float:
    return beta * loss_kl(mu, sigma) + loss_mse(x, x_hat)


def check_latent_size(n: int, ls: int) -> None:
    if n < 4 or n % 4:
        raise UsageError(f"input size must be a positive multiple of 4, got {n}")
    if not 1 <= ls <= n // 4:
        raise UsageError(f"latent size must satisfy 1 <= ls <= n/4 = {n // 4}, got {ls}")


@dataclass
class TrainConfig:
    beta: float = 0.001
    lr: float = 1e-3
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    validation_fraction: float = 0.1

    def __post_init__(self):
        if self.beta < 0:
            raise UsageError("KL weight must be non-negative")
        if self.batch_size < 1:
            raise UsageError("batch size must be at least 1")
        if not 0 <= self.validation_fraction < 1:
            raise UsageError("validation fraction must lie in [0, 1)")
        if self.epochs < 0:
            raise UsageError("epochs must be non-negative")
        if not self.lr > 0:
            raise UsageError("learning rate must be positive")


@dataclass(eq=False)
class ModelWeights:
    kind: str
    n: int
    ls: int
    encoder: list[DenseLayer]
    mu_head: DenseLayer
    logvar_head: DenseLayer | None
    decoder: list[DenseLayer]
    beta: float = 0.0
    metadata: dict = field(default_factory=dict)

    @property
    def layers(self) -> list[DenseLayer]:
        """All layers in storage order."""
        heads = [self.mu_head] + ([self.logvar_head] if self.logvar_head is not None else [])
        return [*self.encoder, *heads, *self.decoder]

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out += layer.params()
        return out

    def fingerprint(self) -> str:
        from .persistence import model_fingerprint

        return model_fingerprint(self)


def build_model(kind: str, n: int, ls: int, seed: int = 0, beta: float = 0.0) -> ModelWeights:
    if kind not in KINDS:
        raise UsageError(f"model kind must be one of {KINDS}, got {kind!r}")
    check_latent_size(n, ls)
    rng = np.random.Generator(np.random.PCG64([seed, 0]))
    h1, h2 = n // 2, n // 4
    encoder = [DenseLayer.init(n, h1, "relu", rng), DenseLayer.init(h1, h2, "relu", rng)]
    mu_head = DenseLayer.init(h2, ls, "identity", rng)
    logvar_head = DenseLayer.init(h2, ls, "identity", rng) if kind == "vae" else None
    decoder = [
        DenseLayer.init(ls, h2, "relu", rng),
        DenseLayer.init(h2, h1, "relu", rng),
        DenseLayer.init(h1, n, "sigmoid", rng),
    ]
    return ModelWeights(kind, n, ls, encoder, mu_head, logvar_head, decoder, beta)


def _as_batch(x, width: int, what: str) -> tuple[np.ndarray, bool]:
    if isinstance(x, LandscapeVector):
        x = x.values
    elif isinstance(x, (list, tuple)) and x and isinstance(x[0], LandscapeVector):
        x = np.stack([v.values for v in x])
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != width:
        raise DimensionError(f"{what} must have length {width}, got shape {arr.shape}")
    return arr, single


def _encode_heads(model: ModelWeights, X: np.ndarray):
    h, enc_cache = forward(model.encoder, X)
    mu, mu_cache = forward([model.mu_head], h)
    if model.logvar_head is None:
        return mu, None, (enc_cache, mu_cache, None)
    sigma, sg_cache = forward([model.logvar_head], h)
    return mu, sigma, (enc_cache, mu_cache, sg_cache)


def encode_batch(model: ModelWeights, X) -> np.ndarray:
    arr, _ = _as_batch(X, model.n, "landscape")
    return _encode_heads(model, arr)[0]


def decode_batch(model: ModelWeights, Z) -> np.ndarray:
    arr, _ = _as_batch(Z, model.ls, "latent vector")
    return forward(model.decoder, arr)[0]


def encode(model: ModelWeights, x) -> np.ndarray:
    """Deterministic features: the mean head for a vae, the bottleneck for an ae."""
    arr, single = _as_batch(x, model.n, "landscape")
    out = encode_batch(model, arr)
    return out[0] if single else out


def decode(model: ModelWeights, z) -> LandscapeVector | np.ndarray:
    arr, single = _as_batch(z, model.ls, "latent vector")
    out = decode_batch(model, arr)
    return LandscapeVector(out[0]) if single else out


def vae_forward(model: ModelWeights, x, eps):
    """Reparameterized pass: returns ``(x_hat, mu, sigma)``."""
    if model.kind != "vae":
        raise UsageError("vae_forward requires a vae model")
    X, single = _as_batch(x, model.n, "landscape")
    E, _ = _as_batch(eps, model.ls, "noise vector")
    if E.shape[0] != X.shape[0]:
        raise DimensionError("one noise vector per input is required")
    mu, sigma, _ = _encode_heads(model, X)
    z = mu + np.exp(0.5 * sigma) * E
    x_hat = forward(model.decoder, z)[0]
    if single:
        return x_hat[0], mu[0], sigma[0]
    return x_hat, mu, sigma


def loss_and_grads(model: ModelWeights, X: np.ndarray, eps: np.ndarray | None, beta: float):
    """Batch-mean loss, its components, and gradients in ``model.params()`` order.

    For an ae ``eps`` and ``beta`` are ignored and the loss is the reconstruction
    term alone.
    """
    B = X.shape[0]
    mu, sigma, (enc_cache, mu_cache, sg_cache) = _encode_heads(model, X)
    if model.kind == "vae":
        std = np.exp(0.5 * sigma)
        z = mu + std * eps if eps is not None else mu
    else:
        z = mu
    x_hat, dec_cache = forward(model.decoder, z)
    diff = x_hat - X
    mse = float(np.sum(diff**2)) / B
    kl = 0.0
    if model.kind == "vae":
        kl = float(0.5 * np.sum(np.exp(sigma) - 1.0 - sigma + mu**2)) / B
    loss = beta * kl + mse if model.kind == "vae" else mse

    dec_tape = backward(model.decoder, dec_cache, 2.0 * diff / B)
    dz = dec_tape.input_grad
    if model.kind == "vae":
        dmu = dz + beta * mu / B
        dsigma = beta * 0.5 * (np.exp(sigma) - 1.0) / B
        if eps is not None:
            dsigma = dsigma + dz * eps * 0.5 * std
        mu_tape = backward([model.mu_head], mu_cache, dmu)
        sg_tape = backward([model.logvar_head], sg_cache, dsigma)
        dh = mu_tape.input_grad + sg_tape.input_grad
        head_grads = mu_tape.grads() + sg_tape.grads()
    else:
        mu_tape = backward([model.mu_head], mu_cache, dz)
        dh = mu_tape.input_grad
        head_grads = mu_tape.grads()
    enc_tape = backward(model.encoder, enc_cache, dh)
    grads = enc_tape.grads() + head_grads + dec_tape.grads()
    return loss, mse, kl, grads


def evaluate_losses(model: ModelWeights, X: np.ndarray, beta: float | None = None) -> dict:
    """Mean per-example losses with ``z = mu`` (no sampling noise)."""
    beta = model.beta if beta is None else beta
    if X.shape[0] == 0:
        return {"loss_vae": math.nan, "loss_mse": math.nan, "loss_kl": math.nan}
    mu, sigma, _ = _encode_heads(model, X)
    x_hat = forward(model.decoder, mu)[0]
    mse = float(np.sum((x_hat - X) ** 2)) / X.shape[0]
    kl = 0.0
    if model.kind == "vae":
        kl = float(0.5 * np.sum(np.exp(sigma) - 1.0 - sigma + mu**2)) / X.shape[0]
    total = beta * kl + mse if model.kind == "vae" else mse
    return {"loss_vae": total, "loss_mse": mse, "loss_kl": kl}


def split_dataset(N: int, validation_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    perm = np.random.Generator(np.random.PCG64([seed, 1])).permutation(N)
    n_val = int(math.floor(N * validation_fraction))
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def train(
    dataset,
    config: TrainConfig | None = None,
    kind: str = "vae",
    ls: int = 16,
    fingerprint: str | None = None,
    on_epoch=None,
) -> ModelWeights:
    """Fit a model with Adam on mini-batches; deterministic for a given seed.

    ``on_epoch`` is called with each epoch's history record.  Validation
    losses are evaluated with ``z = mu``.
    """
    config = config or TrainConfig()
    if isinstance(dataset, (list, tuple)):
        if not dataset:
            raise EmptyDatasetError("training set is empty")
        if isinstance(dataset[0], LandscapeVector):
            dataset = np.stack([v.values for v in dataset])
    data = np.asarray(dataset, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] == 0:
        raise EmptyDatasetError("training set is empty")
    if not np.all(np.isfinite(data)):
        raise DivergenceError("training data contains non-finite values")
    N, n = data.shape
    check_latent_size(n, ls)
    model = build_model(kind, n, ls, config.seed, config.beta)
    train_idx, val_idx = split_dataset(N, config.validation_fraction, config.seed)
    if train_idx.size == 0:
        raise EmptyDatasetError("no training examples left after the validation split")
    X_val = data[val_idx]
    rng = np.random.Generator(np.random.PCG64([config.seed, 2]))
    params = model.params()
    adam = AdamState(lr=config.lr)
    beta = config.beta if kind == "vae" else 0.0
    history = []
    for epoch in range(1, config.epochs + 1):
        order = train_idx[rng.permutation(train_idx.size)]
        eps_all = rng.standard_normal((train_idx.size, ls)) if kind == "vae" else None
        tot_loss = tot_mse = tot_kl = 0.0
        for start in range(0, order.size, config.batch_size):
            sl = slice(start, start + config.batch_size)
            X = data[order[sl]]
            eps = eps_all[sl] if eps_all is not None else None
            loss, mse, kl, grads = loss_and_grads(model, X, eps, beta)
            if not math.isfinite(loss):
                raise DivergenceError(f"non-finite loss in epoch {epoch}")
            adam_step(params, grads, adam)
            B = X.shape[0]
            tot_loss += loss * B
            tot_mse += mse * B
            tot_kl += kl * B
        val = evaluate_losses(model, X_val, beta) if X_val.shape[0] else {
            "loss_vae": math.nan, "loss_mse": math.nan, "loss_kl": math.nan}
        record = {
            "epoch": epoch,
            "train_loss": tot_loss / order.size,
            "train_mse": tot_mse / order.size,
            "train_kl": tot_kl / order.size,
            "val_loss_vae": val["loss_vae"],
            "val_loss_mse": val["loss_mse"],
            "val_loss_kl": val["loss_kl"],
        }
        if not all(math.isfinite(v) or math.isnan(v) for v in record.values()):
            raise DivergenceError(f"non-finite validation loss in epoch {epoch}")
        history.append(record)
        log.debug("epoch %d: %s", epoch, record)
        if on_epoch is not None:
            on_epoch(record)
    model.metadata = {
        "seed": config.seed,
        "beta": config.beta,
        "epochs": config.epochs,
        "lr": config.lr,
        "batch_size": config.batch_size,
        "validation_fraction": config.validation_fraction,
        "dataset_fingerprint": fingerprint,
        "n_train": int(train_idx.size),
        "n_validation": int(val_idx.size),
        "history": history,
    }
    return model
