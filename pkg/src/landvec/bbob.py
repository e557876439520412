"""The 24 noise-free BBOB functions with a simplified instance scheme.

Every function is ``f(x) = base_fid(R @ (x - x_opt)) + f_opt`` where the base
form has its optimum ``0`` at the origin.  Instance 0 is the untransformed
base (``R = I``, ``x_opt = 0``, ``f_opt = 0``).  For instance ``k >= 1``:

* ``R`` is the Q factor of a seeded Gaussian matrix (signs fixed so the
  factorization is unique),
* ``x_opt ~ U[-4, 4]^d`` and ``f_opt ~ U[-100, 100]``,

all drawn from ``numpy.random.PCG64(SeedSequence([fid, instance, d]))``.

The COCO oscillation/asymmetry warps and boundary penalties are not
reproduced.  Functions that are rotated in COCO (9-24, and the inner
rotation of 6/7/13) use an additional fixed rotation that depends on
``(fid, d)`` only, as do the Gallagher peak layouts.  Hence the instance
identity above holds exactly for every fid.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from .errors import DimensionError, NonFiniteInputError, UnknownFunctionError, UsageError

FIDS = tuple(range(1, 25))

MULTIMODAL = ("none", "low", "medium", "high")
GLOBAL_STRUCTURE = ("none", "weak", "medium", "strong", "deceptive")
FUNNEL = ("yes", "none")
PROPERTIES = {
    "multimodal": MULTIMODAL,
    "global_structure": GLOBAL_STRUCTURE,
    "funnel": FUNNEL,
}

NAMES = {
    1: "Sphere", 2: "Ellipsoidal separable", 3: "Rastrigin separable",
    4: "Bueche-Rastrigin", 5: "Linear Slope", 6: "Attractive Sector",
    7: "Step Ellipsoidal", 8: "Rosenbrock", 9: "Rosenbrock rotated",
    10: "Ellipsoidal high cond.", 11: "Discus", 12: "Bent Cigar",
    13: "Sharp Ridge", 14: "Different Powers", 15: "Rastrigin multimodal",
    16: "Weierstrass", 17: "Schaffer F7", 18: "Schaffer F7 mod. ill-cond.",
    19: "Griewank-Rosenbrock", 20: "Schwefel", 21: "Gallagher 101 Peaks",
    22: "Gallagher 21 Peaks", 23: "Katsuura", 24: "Lunacek bi-Rastrigin",
}


def _check_fid(fid: int) -> None:
    if fid not in FIDS:
        raise UnknownFunctionError(f"unknown BBOB function id {fid}; expected 1..24")


@dataclass(frozen=True)
class HighLevelLabel:
    multimodal: str
    global_structure: str
    funnel: str

    def __post_init__(self):
        for prop, cats in PROPERTIES.items():
            if getattr(self, prop) not in cats:
                raise ValueError(f"{prop}={getattr(self, prop)!r} not in {cats}")

    def as_tuple(self) -> tuple[str, str, str]:
        return (self.multimodal, self.global_structure, self.funnel)


@lru_cache(maxsize=None)
def _label_table() -> dict[int, HighLevelLabel]:
    text = resources.files("landvec").joinpath("data/bbob_labels.csv").read_text()
    rows = list(csv.DictReader(text.splitlines()))
    return {
        int(r["fid"]): HighLevelLabel(r["multimodal"], r["global_structure"], r["funnel"])
        for r in rows
    }


def high_level_properties(fid: int) -> HighLevelLabel:
    _check_fid(fid)
    return _label_table()[fid]


def property_class(fid: int, prop: str) -> int:
    """Dense class id of ``fid`` for one property (index into ``PROPERTIES[prop]``)."""
    if prop not in PROPERTIES:
        raise UsageError(f"unknown property {prop!r}; expected one of {sorted(PROPERTIES)}")
    return PROPERTIES[prop].index(getattr(high_level_properties(fid), prop))


# -- helpers -----------------------------------------------------------------

def random_rotation(rng: np.random.Generator, d: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.where(np.diag(r) < 0, -1.0, 1.0)


@lru_cache(maxsize=None)
def _fixed_rotation(fid: int, d: int) -> np.ndarray:
    rot = random_rotation(np.random.Generator(np.random.PCG64([0x5EED, fid, d])), d)
    rot.setflags(write=False)
    return rot


def _exponents(d: int, scale: float) -> np.ndarray:
    """``scale * i / (d - 1)`` for ``i = 0..d-1``."""
    if d == 1:
        return np.full(1, scale)
    return scale * np.arange(d) / (d - 1)


def _lambda(alpha: float, d: int) -> np.ndarray:
    return alpha ** _exponents(d, 0.5)


def _rot(z, fid):
    # z is (N, d); apply the fixed inner rotation to each row
    return z @ _fixed_rotation(fid, z.shape[1]).T


def _rastrigin(w):
    d = w.shape[1]
    return 10.0 * (d - np.cos(2 * np.pi * w).sum(axis=1)) + (w**2).sum(axis=1)


def _rosenbrock(s):
    a, b = s[:, :-1], s[:, 1:]
    return (100.0 * (a**2 - b) ** 2 + (a - 1.0) ** 2).sum(axis=1)


def _schaffer(w):
    d = w.shape[1]
    s = np.sqrt(w[:, :-1] ** 2 + w[:, 1:] ** 2)
    terms = np.sqrt(s) + np.sqrt(s) * np.sin(50.0 * s**0.2) ** 2
    return (terms.sum(axis=1) / (d - 1)) ** 2


# -- base forms (optimum 0 at z = 0) ---------------------------------------

def _f1(z):
    return (z**2).sum(axis=1)


def _f2(z):
    return (10.0 ** _exponents(z.shape[1], 6.0) * z**2).sum(axis=1)


def _f3(z):
    return _rastrigin(_lambda(10.0, z.shape[1]) * z)


def _f4(z):
    d = z.shape[1]
    s = 10.0 ** _exponents(d, 0.5)
    odd = (np.arange(d) % 2 == 0)  # 1-based odd coordinates
    scale = np.where((z > 0) & odd, 10.0 * s, s)
    return _rastrigin(scale * z)


def _f5(z):
    # slope rising away from the optimum corner, flat beyond it
    s = 10.0 ** _exponents(z.shape[1], 1.0)
    return (s * np.maximum(-z, 0.0)).sum(axis=1)


def _f6(z):
    w = _rot(_lambda(10.0, z.shape[1]) * _rot(z, 106), 6)
    s = np.where(w > 0, 100.0, 1.0)
    return ((s * w) ** 2).sum(axis=1) ** 0.9


def _f7(z):
    d = z.shape[1]
    zh = _lambda(10.0, d) * _rot(z, 107)
    zt = np.where(np.abs(zh) > 0.5, np.floor(0.5 + zh), np.floor(0.5 + 10.0 * zh) / 10.0)
    w = _rot(zt, 7)
    body = (10.0 ** _exponents(d, 2.0) * w**2).sum(axis=1)
    return 0.1 * np.maximum(np.abs(zh[:, 0]) / 1e4, body)


def _f8(z):
    return _rosenbrock(max(1.0, np.sqrt(z.shape[1]) / 8.0) * z + 1.0)


def _f9(z):
    return _rosenbrock(max(1.0, np.sqrt(z.shape[1]) / 8.0) * _rot(z, 9) + 1.0)


def _f10(z):
    return _f2(_rot(z, 10))


def _f11(z):
    w = _rot(z, 11) ** 2
    return 1e6 * w[:, 0] + w[:, 1:].sum(axis=1)


def _f12(z):
    w = _rot(z, 12) ** 2
    return w[:, 0] + 1e6 * w[:, 1:].sum(axis=1)


def _f13(z):
    w = _rot(_lambda(10.0, z.shape[1]) * _rot(z, 113), 13) ** 2
    return w[:, 0] + 100.0 * np.sqrt(w[:, 1:].sum(axis=1))


def _f14(z):
    w = np.abs(_rot(z, 14))
    return np.sqrt((w ** (2.0 + _exponents(z.shape[1], 4.0))).sum(axis=1))


def _f15(z):
    return _rastrigin(_rot(_lambda(10.0, z.shape[1]) * _rot(z, 115), 15))


_WEIERSTRASS_K = np.arange(12)
_WEIERSTRASS_F0 = float(np.sum(0.5**_WEIERSTRASS_K * np.cos(np.pi * 3.0**_WEIERSTRASS_K)))


def _f16(z):
    d = z.shape[1]
    w = _rot(_lambda(0.01, d) * _rot(z, 116), 16)
    terms = 0.5**_WEIERSTRASS_K * np.cos(2 * np.pi * 3.0**_WEIERSTRASS_K * (w[..., None] + 0.5))
    return 10.0 * (terms.sum(axis=(1, 2)) / d - _WEIERSTRASS_F0) ** 3


def _f17(z):
    return _schaffer(_lambda(10.0, z.shape[1]) * _rot(z, 17))


def _f18(z):
    return _schaffer(_lambda(1000.0, z.shape[1]) * _rot(z, 18))


def _f19(z):
    d = z.shape[1]
    s = max(1.0, np.sqrt(d) / 8.0) * _rot(z, 19) + 1.0
    a, b = s[:, :-1], s[:, 1:]
    t = 100.0 * (a**2 - b) ** 2 + (a - 1.0) ** 2
    return 10.0 * (t / 4000.0 - np.cos(t)).sum(axis=1) / (d - 1) + 10.0


_SCHWEFEL_X = 4.2096874633
_SCHWEFEL_W0 = 100.0 * _SCHWEFEL_X
_SCHWEFEL_C = _SCHWEFEL_W0 * np.sin(np.sqrt(_SCHWEFEL_W0)) / 100.0


def _f20(z):
    d = z.shape[1]
    w = 100.0 * (_lambda(10.0, d) * z + _SCHWEFEL_X)
    pen = (np.maximum(np.abs(w / 100.0) - 5.0, 0.0) ** 2).sum(axis=1)
    val = -(w * np.sin(np.sqrt(np.abs(w)))).sum(axis=1) / (100.0 * d)
    return val + _SCHWEFEL_C + 100.0 * pen


@lru_cache(maxsize=None)
def _gallagher_layout(fid: int, d: int):
    peaks = 101 if fid == 21 else 21
    rng = np.random.Generator(np.random.PCG64([0x6A11, fid, d]))
    weights = np.concatenate(([10.0], 1.1 + 8.0 * np.arange(peaks - 1) / (peaks - 2)))
    alphas = rng.permutation(1000.0 ** (2.0 * np.arange(peaks - 1) / (peaks - 2)))
    alphas = np.concatenate(([1000.0 if fid == 21 else 1000.0**2], alphas))
    cond = np.stack([rng.permutation(_lambda(a, d)) / a**0.25 for a in alphas])
    bound = 5.0 if fid == 21 else 4.9
    centers = rng.uniform(-bound, bound, size=(peaks, d))
    centers[0] = 0.0
    return weights, cond, centers


def _gallagher(z, fid):
    weights, cond, centers = _gallagher_layout(fid, z.shape[1])
    diff = z[:, None, :] - centers[None, :, :]
    u = diff @ _fixed_rotation(fid, z.shape[1]).T
    quad = (cond[None] * u**2).sum(axis=2)
    best = (weights[None] * np.exp(-quad / (2.0 * z.shape[1]))).max(axis=1)
    return (10.0 - best) ** 2


def _f21(z):
    return _gallagher(z, 21)


def _f22(z):
    return _gallagher(z, 22)


def _f23(z):
    d = z.shape[1]
    w = _rot(_lambda(100.0, d) * _rot(z, 123), 23)
    pows = 2.0 ** np.arange(1, 33)
    scaled = w[..., None] * pows
    inner = (np.abs(scaled - np.round(scaled)) / pows).sum(axis=2)
    prod = np.prod((1.0 + np.arange(1, d + 1) * inner) ** (10.0 / d**1.2), axis=1)
    return 10.0 / d**2 * (prod - 1.0)


_LUNACEK_MU0 = 2.5


def _f24(z):
    d = z.shape[1]
    s = 1.0 - 1.0 / (2.0 * np.sqrt(d + 20.0) - 8.2)
    mu1 = -np.sqrt((_LUNACEK_MU0**2 - 1.0) / s)
    u = 2.0 * z
    first = (u**2).sum(axis=1)
    second = d + s * ((u + _LUNACEK_MU0 - mu1) ** 2).sum(axis=1)
    w = _rot(_lambda(100.0, d) * _rot(u, 124), 24)
    return np.minimum(first, second) + 10.0 * (d - np.cos(2 * np.pi * w).sum(axis=1))


BASE_FUNCTIONS = {
    1: _f1, 2: _f2, 3: _f3, 4: _f4, 5: _f5, 6: _f6, 7: _f7, 8: _f8,
    9: _f9, 10: _f10, 11: _f11, 12: _f12, 13: _f13, 14: _f14, 15: _f15,
    16: _f16, 17: _f17, 18: _f18, 19: _f19, 20: _f20, 21: _f21, 22: _f22,
    23: _f23, 24: _f24,
}


@dataclass(frozen=True, eq=False)
class BbobProblem:
    fid: int
    instance: int
    d: int
    x_opt: np.ndarray
    f_opt: float
    rotation: np.ndarray

    @property
    def name(self) -> str:
        return NAMES[self.fid]

    def __call__(self, x) -> np.ndarray | float:
        return evaluate_bbob(self, x)


def make_problem(fid: int, instance: int, d: int) -> BbobProblem:
    _check_fid(fid)
    if instance < 0:
        raise UsageError(f"instance must be non-negative, got {instance}")
    if d < 2:
        raise UsageError(f"dimension must be at least 2, got {d}")
    if instance == 0:
        x_opt, f_opt, rot = np.zeros(d), 0.0, np.eye(d)
    else:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([fid, instance, d])))
        rot = random_rotation(rng, d)
        x_opt = rng.uniform(-4.0, 4.0, size=d)
        f_opt = float(rng.uniform(-100.0, 100.0))
    x_opt.setflags(write=False)
    rot.setflags(write=False)
    return BbobProblem(fid, instance, d, x_opt, f_opt, rot)


def evaluate_bbob(problem: BbobProblem, x) -> np.ndarray | float:
    """Value at one point (``d``-vector) or at each row of an ``N x d`` array."""
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    pts = arr[None, :] if single else arr
    if pts.ndim != 2 or pts.shape[1] != problem.d:
        raise DimensionError(f"points have shape {arr.shape}, problem expects d={problem.d}")
    if not np.all(np.isfinite(pts)):
        raise NonFiniteInputError("evaluation point contains non-finite entries")
    z = (pts - problem.x_opt) @ problem.rotation.T
    vals = BASE_FUNCTIONS[problem.fid](z) + problem.f_opt
    return float(vals[0]) if single else vals
