"""A small set of classical landscape features plus feature-vector plumbing.

``ela_lite`` computes nine features from the design and its (normalized)
objective values, so no additional function evaluations are needed:

==================  =========================================================
y_skewness          sample skewness of y
y_kurtosis          sample excess kurtosis of y
y_entropy           Shannon entropy (nats) of a 20-bin histogram on [0, 1]
lin_r2              adjusted R^2 of y ~ 1 + x
lin_coef_ratio      max |coef| / min |coef| of the linear terms
quad_r2             adjusted R^2 of y ~ 1 + x + x^2 (no interactions)
quad_cond           max / min |coef| of the squared terms
disp_10, disp_25    mean pairwise distance among the best 10% / 25% of points
                    divided by the mean pairwise distance of all points
==================  =========================================================

Undefined values (e.g. skewness of a constant vector, a zero coefficient in
a ratio) are replaced by 0 and listed in ``FeatureVector.flags``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist
from scipy.stats import kurtosis, skew

from .errors import DimensionError, InsufficientSamplesError, NameCollisionError
from .sampling import DoeMatrix, LandscapeVector, normalize_array

ELA_NAMES = (
    "y_skewness", "y_kurtosis", "y_entropy",
    "lin_r2", "lin_coef_ratio", "quad_r2", "quad_cond",
    "disp_10", "disp_25",
)
RIDGE = 1e-10
ENTROPY_BINS = 20


@dataclass(frozen=True)
class FeatureVector:
    names: tuple[str, ...]
    values: np.ndarray
    flags: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        names = tuple(self.names)
        vals = np.array(self.values, dtype=np.float64, copy=True).reshape(-1)
        if len(set(names)) != len(names):
            raise NameCollisionError("feature names must be unique")
        if len(names) != vals.shape[0]:
            raise DimensionError(f"{len(names)} names for {vals.shape[0]} values")
        vals.setflags(write=False)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "flags", frozenset(self.flags))

    def __len__(self) -> int:
        return len(self.names)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values.tolist()))


def _fit(A: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    """Ridge-jittered normal equations; returns coefficients and adjusted R^2."""
    gram = A.T @ A
    gram[np.diag_indices_from(gram)] += RIDGE
    coef = np.linalg.solve(gram, A.T @ y)
    resid = y - A @ coef
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    n, k = A.shape
    if ss_tot == 0.0:
        return coef, np.nan
    r2 = 1.0 - float(resid @ resid) / ss_tot
    return coef, 1.0 - (1.0 - r2) * (n - 1) / (n - k)


def _ratio(c: np.ndarray) -> float:
    mags = np.abs(c)
    return np.nan if mags.min() == 0.0 else float(mags.max() / mags.min())


def _dispersion(X: np.ndarray, y: np.ndarray, frac: float, all_mean: float) -> float:
    best = X[y <= np.quantile(y, frac)]
    if best.shape[0] < 2 or all_mean == 0.0:
        return np.nan
    return float(pdist(best).mean() / all_mean)


def ela_lite(doe: DoeMatrix | np.ndarray, y) -> FeatureVector:
    X = doe.points if isinstance(doe, DoeMatrix) else np.asarray(doe, dtype=np.float64)
    raw = y.values if isinstance(y, LandscapeVector) else np.asarray(y, dtype=np.float64)
    n, d = X.shape
    if raw.shape != (n,):
        raise DimensionError(f"expected {n} objective values, got shape {raw.shape}")
    if n < 4 * d:
        raise InsufficientSamplesError(f"need at least {4 * d} samples for d={d}, got {n}")
    yn = normalize_array(raw)

    constant = np.ptp(yn) == 0.0
    with np.errstate(all="ignore"):
        sk = np.nan if constant else float(skew(yn))
        ku = np.nan if constant else float(kurtosis(yn))
    counts, _ = np.histogram(yn, bins=ENTROPY_BINS, range=(0.0, 1.0))
    p = counts[counts > 0] / n
    entropy = float(-np.sum(p * np.log(p)))

    ones = np.ones((n, 1))
    lin_coef, lin_r2 = _fit(np.hstack([ones, X]), yn)
    quad_coef, quad_r2 = _fit(np.hstack([ones, X, X**2]), yn)

    all_mean = float(pdist(X).mean())
    values = [
        sk, ku, entropy,
        lin_r2, _ratio(lin_coef[1:]), quad_r2, _ratio(quad_coef[1 + d:]),
        _dispersion(X, yn, 0.10, all_mean), _dispersion(X, yn, 0.25, all_mean),
    ]
    arr = np.array(values, dtype=np.float64)
    bad = ~np.isfinite(arr)
    flags = frozenset(name for name, b in zip(ELA_NAMES, bad) if b)
    arr[bad] = 0.0
    return FeatureVector(ELA_NAMES, arr, flags)


def concat_features(a: FeatureVector, b: FeatureVector) -> FeatureVector:
    clash = set(a.names) & set(b.names)
    if clash:
        raise NameCollisionError(f"duplicate feature names: {sorted(clash)}")
    return FeatureVector(a.names + b.names, np.concatenate([a.values, b.values]), a.flags | b.flags)


def latent_as_features(z) -> FeatureVector:
    vals = np.asarray(z, dtype=np.float64).reshape(-1)
    return FeatureVector(tuple(f"z_{i}" for i in range(vals.shape[0])), vals)


def write_feature_csv(path, rows: list[FeatureVector]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if not rows:
            return
        writer.writerow(rows[0].names)
        for fv in rows:
            if fv.names != rows[0].names:
                raise DimensionError("all rows of a feature table must share the same names")
            writer.writerow([f"{v:.17g}" for v in fv.values])
