"""Latent-space archive of random functions and exact nearest-neighbour lookup."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, IncompatibilityError, InvalidKError, UsageError
from .randfunc import FunctionExpr, evaluate, parse, serialize
from .sampling import DoeMatrix, normalize_array, rescale
from .vae import ModelWeights, encode_batch

log = logging.getLogger(__name__)


def _quantize(z: np.ndarray) -> np.ndarray:
    # latents are kept at float32 precision so archive files round-trip exactly
    return np.asarray(z, dtype=np.float32).astype(np.float64)


@dataclass
class FunctionArchive:
    fingerprint: str
    expressions: list[str]
    latents: np.ndarray
    m: int
    d: int
    lower: float
    upper: float
    skipped: int = 0

    def __len__(self) -> int:
        return len(self.expressions)

    @property
    def latent_size(self) -> int:
        return self.latents.shape[1]


def build_archive(model: ModelWeights, functions, doe: DoeMatrix, lower=-5.0, upper=5.0) -> FunctionArchive:
    """Evaluate, normalize and encode every function; constant landscapes are skipped."""
    if doe.n != model.n:
        raise DimensionError(f"design has {doe.n} points but the model expects {model.n}")
    if doe.m is None:
        raise UsageError("archives require a Sobol design (n = 2**m)")
    pts = rescale(doe, lower, upper)
    kept, rows, skipped = [], [], 0
    for f in functions:
        expr = f if isinstance(f, FunctionExpr) else parse(f, doe.d)
        text = serialize(expr)
        y = evaluate(expr, pts)
        if not np.all(np.isfinite(y)) or np.ptp(y) == 0:
            skipped += 1
            continue
        kept.append(text)
        rows.append(normalize_array(y))
    if skipped:
        log.warning("skipped %d degenerate function(s) while building the archive", skipped)
    Y = np.array(rows, dtype=np.float64).reshape(len(rows), model.n)
    Z = _quantize(encode_batch(model, Y)) if rows else np.zeros((0, model.ls))
    return FunctionArchive(model.fingerprint(), kept, Z, doe.m, doe.d, float(lower), float(upper), skipped)


def nearest(archive: FunctionArchive, query, k: int = 5) -> list[tuple[int, float]]:
    """``k`` closest entries by Euclidean distance, ascending, ties by lower index."""
    q = np.asarray(query, dtype=np.float64)
    if q.ndim != 1 or q.shape[0] != archive.latents.shape[1]:
        raise DimensionError(
            f"query of length {q.shape} does not match archive latent size {archive.latents.shape[1]}"
        )
    if not 1 <= k <= len(archive):
        raise InvalidKError(f"k must be in [1, {len(archive)}], got {k}")
    dist = np.sqrt(np.sum((archive.latents - q) ** 2, axis=1))
    order = np.argsort(dist, kind="stable")[:k]
    return [(int(i), float(dist[i])) for i in order]


def query_landscape(model: ModelWeights, archive: FunctionArchive, raw_y, k: int = 5):
    if model.fingerprint() != archive.fingerprint:
        raise IncompatibilityError(
            f"archive was built with model {archive.fingerprint}, got {model.fingerprint()}"
        )
    y = np.asarray(raw_y, dtype=np.float64)
    if y.ndim != 1 or y.shape[0] != model.n:
        raise DimensionError(f"query must have {model.n} values, got shape {y.shape}")
    z = _quantize(encode_batch(model, normalize_array(y)[None, :])[0])
    return nearest(archive, z, k)
