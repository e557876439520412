"""Sobol designs of experiments, box rescaling and value normalization."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import (
    DataError,
    InvalidBoundsError,
    NonFiniteInputError,
    UnsupportedDimensionError,
    UsageError,
)

MAX_M = 16
MAX_DIM = 64
_BITS = 32


@lru_cache(maxsize=None)
def _direction_table() -> dict[int, tuple[int, int, tuple[int, ...]]]:
    """Joe-Kuo rows keyed by dimension: (degree s, coefficients a, initial m)."""
    text = resources.files("landvec").joinpath("data/joe_kuo_d64.txt").read_text()
    table = {}
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        dim, s, a, *m = (int(tok) for tok in line.split())
        table[dim] = (s, a, tuple(m))
    return table


def max_supported_dimension() -> int:
    return 1 + len(_direction_table())


@lru_cache(maxsize=None)
def direction_numbers(d: int) -> np.ndarray:
    """``d x 32`` array of integer direction numbers ``v_k = m_k * 2**(32-k)``."""
    table = _direction_table()
    if d < 1 or d > 1 + len(table):
        raise UnsupportedDimensionError(
            f"Sobol direction numbers available for 1..{1 + len(table)} dimensions, got {d}"
        )
    v = np.zeros((d, _BITS), dtype=np.uint64)
    # first dimension: van der Corput, all m_k = 1
    v[0] = [1 << (_BITS - 1 - k) for k in range(_BITS)]
    for j in range(1, d):
        s, a, m_init = table[j + 1]
        m = list(m_init)
        for k in range(s, _BITS):
            new = m[k - s] ^ (m[k - s] << s)
            for i in range(1, s):
                if (a >> (s - 1 - i)) & 1:
                    new ^= m[k - i] << i
            m.append(new)
        v[j] = [m[k] << (_BITS - 1 - k) for k in range(_BITS)]
    v.setflags(write=False)
    return v


@dataclass(frozen=True)
class DoeMatrix:
    """An ``n x d`` design in the unit cube.

    Sobol designs have ``n = 2**m``.  Custom designs (``custom=True``) relax the
    power-of-two requirement and carry ``m = None``.
    """

    points: np.ndarray
    m: int | None = None
    custom: bool = False

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.ndim != 2:
            raise DataError("design must be a 2-d array")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @classmethod
    def from_points(cls, points) -> DoeMatrix:
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise DataError("custom design must be a non-empty 2-d array")
        if not np.all(np.isfinite(pts)):
            raise NonFiniteInputError("custom design contains non-finite entries")
        if pts.min() < 0.0 or pts.max() > 1.0:
            raise DataError("custom design points must lie in [0, 1]^d")
        n = pts.shape[0]
        m = int(math.log2(n)) if n & (n - 1) == 0 else None
        return cls(pts, m=m, custom=True)

    def __eq__(self, other):
        if not isinstance(other, DoeMatrix):
            return NotImplemented
        return (
            self.m == other.m
            and self.custom == other.custom
            and np.array_equal(self.points, other.points)
        )

    def __hash__(self):
        return hash((self.m, self.custom, self.points.tobytes()))


def sobol_points(m: int, d: int) -> DoeMatrix:
    """First ``2**m`` Sobol points in ``d`` dimensions (Gray-code order, origin first)."""
    if not 0 <= m <= MAX_M:
        raise UsageError(f"exponent m must be in [0, {MAX_M}], got {m}")
    if d < 1:
        raise UsageError(f"dimension must be positive, got {d}")
    if d > MAX_DIM:
        raise UnsupportedDimensionError(f"dimension {d} exceeds supported maximum {MAX_DIM}")
    v = direction_numbers(d)
    n = 1 << m
    idx = np.arange(n, dtype=np.uint64)
    gray = idx ^ (idx >> np.uint64(1))
    x = np.zeros((n, d), dtype=np.uint64)
    for bit in range(m):
        on = ((gray >> np.uint64(bit)) & np.uint64(1)).astype(bool)
        x[on] ^= v[:, bit]
    return DoeMatrix(x.astype(np.float64) / float(1 << _BITS), m=m)


def _check_bounds(lower, upper, d: int) -> tuple[np.ndarray, np.ndarray]:
    lo = np.broadcast_to(np.asarray(lower, dtype=np.float64), (d,))
    hi = np.broadcast_to(np.asarray(upper, dtype=np.float64), (d,))
    if np.any(lo >= hi):
        raise InvalidBoundsError(f"lower bounds must be below upper bounds: {lo} vs {hi}")
    return lo, hi


def rescale(doe: DoeMatrix | np.ndarray, lower, upper) -> np.ndarray:
    pts = doe.points if isinstance(doe, DoeMatrix) else np.asarray(doe, dtype=np.float64)
    lo, hi = _check_bounds(lower, upper, pts.shape[1])
    return lo + pts * (hi - lo)


def unscale(points: np.ndarray, lower, upper) -> np.ndarray:
    """Inverse of :func:`rescale`."""
    pts = np.asarray(points, dtype=np.float64)
    lo, hi = _check_bounds(lower, upper, pts.shape[1])
    return (pts - lo) / (hi - lo)


@dataclass(frozen=True)
class LandscapeVector:
    values: np.ndarray
    source_id: str | None = None

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64, copy=True)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return self.values.shape[0]


def normalize_array(raw) -> np.ndarray:
    """Min-max normalize the last axis; constant rows map to zeros."""
    y = np.asarray(raw, dtype=np.float64)
    if not np.all(np.isfinite(y)):
        raise NonFiniteInputError("objective values contain NaN or infinity")
    lo = y.min(axis=-1, keepdims=True)
    span = y.max(axis=-1, keepdims=True) - lo
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, (y - lo) / safe, 0.0)


def normalize_values(raw, source_id: str | None = None) -> LandscapeVector:
    y = np.asarray(raw, dtype=np.float64)
    if y.ndim != 1:
        raise DataError("expected a one-dimensional value vector")
    return LandscapeVector(normalize_array(y), source_id)


def write_doe_csv(doe: DoeMatrix, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x{i}" for i in range(doe.d)])
        for row in doe.points:
            writer.writerow([f"{v:.17g}" for v in row])


def read_doe_csv(path) -> DoeMatrix:
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty design file")
    header = rows[0]
    if header != [f"x{i}" for i in range(len(header))]:
        raise DataError(f"{path}: header must be x0,...,x{{d-1}}")
    try:
        pts = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=np.float64)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    if pts.ndim != 2 or pts.shape[1] != len(header):
        raise DataError(f"{path}: ragged design rows")
    doe = DoeMatrix.from_points(pts)
    n = doe.n
    if n & (n - 1) == 0:
        sob = sobol_points(int(math.log2(n)), doe.d) if doe.d <= MAX_DIM and n <= 1 << MAX_M else None
        if sob is not None and np.array_equal(sob.points, doe.points):
            return sob
    return doe
