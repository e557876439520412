"""Experiment harnesses: loss sweeps, classical MDS and latent traversals."""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConvergenceError, DimensionError, IndexOutOfRangeError, LandvecError, NonFiniteInputError, UsageError
from .vae import ModelWeights, TrainConfig, check_latent_size, decode_batch, train

DEFAULT_LATENT_SIZES = (4, 8, 16, 24, 32)
DEFAULT_KL_WEIGHTS = (0.0001, 0.0002, 0.001, 0.005, 0.01)
MDS_TOL = 1e-10
MDS_MAX_ITER = 10_000


@dataclass
class SweepResult:
    rows: list[dict]
    dataset_fingerprint: str | None
    seed: int
    models: dict = field(default_factory=dict, repr=False)

    def cell(self, latent_size: int, kl_weight: float) -> dict:
        for r in self.rows:
            if r["latent_size"] == latent_size and r["kl_weight"] == kl_weight:
                return r
        raise KeyError((latent_size, kl_weight))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["latent_size", "kl_weight", "loss_vae", "loss_mse", "loss_kl"])
        for r in self.rows:
            writer.writerow([
                r["latent_size"], repr(r["kl_weight"]),
                f"{r['loss_vae']:.17g}", f"{r['loss_mse']:.17g}", f"{r['loss_kl']:.17g}",
            ])
        return buf.getvalue()


def sweep(
    latent_sizes=DEFAULT_LATENT_SIZES,
    kl_weights=DEFAULT_KL_WEIGHTS,
    dataset=None,
    config: TrainConfig | None = None,
    fingerprint: str | None = None,
    keep_models: bool = False,
) -> SweepResult:
    """Train one VAE per (latent size, KL weight) cell with the shared seed."""
    config = config or TrainConfig()
    data = np.asarray(dataset, dtype=np.float64)
    if data.ndim != 2:
        raise DimensionError("sweep dataset must be a records x n matrix")
    for ls in latent_sizes:
        check_latent_size(data.shape[1], ls)
    rows, models = [], {}
    for ls, beta in itertools.product(latent_sizes, kl_weights):
        try:
            model = train(data, replace(config, beta=beta), "vae", ls, fingerprint)
        except LandvecError as exc:
            exc.args = (f"sweep cell ls={ls}, beta={beta}: {exc}",)
            raise
        last = model.metadata["history"][-1]
        rows.append({
            "latent_size": ls,
            "kl_weight": beta,
            "loss_vae": last["val_loss_vae"],
            "loss_mse": last["val_loss_mse"],
            "loss_kl": last["val_loss_kl"],
        })
        if keep_models:
            models[(ls, beta)] = model
    return SweepResult(rows, fingerprint, config.seed, models)


# -- classical MDS -------------------------------------------------------------

@dataclass(frozen=True)
class Embedding2D:
    points: np.ndarray
    stress: float
    iterations: int = 0

    def __len__(self) -> int:
        return self.points.shape[0]


def _power_eig(B: np.ndarray, start: np.ndarray, scale: float, tol: float, max_iter: int):
    """Dominant eigenpair; converged once ``|B v - lam v| <= tol * scale``."""
    v = start / np.linalg.norm(start)
    for it in range(1, max_iter + 1):
        w = B @ v
        lam = float(v @ w)
        if np.linalg.norm(w - lam * v) <= tol * scale:
            return lam, v, it
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0, v, it
        v = w / norm
    raise ConvergenceError("power iteration did not converge", max_iter)


def classical_mds(vectors, tol: float = MDS_TOL, max_iter: int = MDS_MAX_ITER) -> Embedding2D:
    """Torgerson MDS onto two dimensions; top eigenpairs via power iteration."""
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionError(f"expected a k x p matrix, got shape {X.shape}")
    k = X.shape[0]
    if k < 3:
        raise UsageError(f"MDS needs at least 3 vectors, got {k}")
    if not np.all(np.isfinite(X)):
        raise NonFiniteInputError("MDS input contains non-finite values")
    Xc = X - X.mean(axis=0)
    sq = np.sum(Xc**2, axis=1)
    D2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * Xc @ Xc.T, 0.0)
    np.fill_diagonal(D2, 0.0)
    J = np.eye(k) - 1.0 / k
    B = -0.5 * J @ D2 @ J
    B = 0.5 * (B + B.T)

    # deterministic, generic start vectors
    rng = np.random.Generator(np.random.PCG64(0))
    coords = np.zeros((k, 2))
    total_iter = 0
    Bk = B.copy()
    scale = max(float(np.linalg.norm(B)), 1e-300)
    for axis in range(2):
        lam, v, it = _power_eig(Bk, rng.standard_normal(k), scale, tol, max_iter)
        total_iter += it
        if lam > 0:
            coords[:, axis] = math.sqrt(lam) * v
        Bk = Bk - lam * np.outer(v, v)
    coords -= coords.mean(axis=0)

    iu = np.triu_indices(k, 1)
    d_in = np.sqrt(D2[iu])
    diff = coords[:, None, :] - coords[None, :, :]
    d_out = np.sqrt(np.sum(diff**2, axis=2))[iu]
    denom = float(np.sum(d_in**2))
    stress = math.sqrt(float(np.sum((d_in - d_out) ** 2)) / denom) if denom > 0 else 0.0
    return Embedding2D(coords, stress, total_iter)


def mds_csv(embedding: Embedding2D, labels=None, ids=None) -> str:
    k = len(embedding)
    labels = [""] * k if labels is None else list(labels)
    ids = list(range(k)) if ids is None else list(ids)
    if len(labels) != k or len(ids) != k:
        raise DimensionError("ids and labels must match the number of embedded points")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "label", "mds_x", "mds_y"])
    for i, lab, (x, y) in zip(ids, labels, embedding.points):
        writer.writerow([i, lab, f"{x:.17g}", f"{y:.17g}"])
    return buf.getvalue()


# -- traversal -----------------------------------------------------------------

def latent_traversal(model: ModelWeights, z0, index: int, deltas) -> list[np.ndarray]:
    """Decode ``z0`` with ``z0[index]`` shifted by each delta in turn."""
    z0 = np.asarray(z0, dtype=np.float64).reshape(-1)
    if z0.shape[0] != model.ls:
        raise DimensionError(f"latent vector has length {z0.shape[0]}, model uses {model.ls}")
    if not 0 <= index < model.ls:
        raise IndexOutOfRangeError(f"latent index {index} outside [0, {model.ls})")
    deltas = [float(x) for x in deltas]
    if not deltas:
        return []
    Z = np.repeat(z0[None, :], len(deltas), axis=0)
    Z[:, index] += deltas
    return list(decode_batch(model, Z))


def traversal_deltas(lo: float = -1.0, hi: float = 1.0, step: float = 0.25) -> list[float]:
    if step <= 0 or hi < lo:
        raise UsageError("traversal needs step > 0 and lo <= hi")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [lo + i * step for i in range(count)]
