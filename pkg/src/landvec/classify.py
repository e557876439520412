"""Random forest classifier, macro-F1 scoring and the BBOB property tasks.

Trees use axis-aligned Gini splits with midpoint thresholds (``x <= t`` goes
left), consider ``floor(sqrt(p))`` randomly drawn features per split (more
are drawn if none of those can split the node), and grow until a node is pure
or holds fewer than two samples.  Each tree sees a bootstrap sample of the
training set.  All randomness is drawn from ``PCG64([seed, tree_index])``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import bbob
from .errors import ConfigurationError, DegenerateDataError, DimensionError, NonFiniteInputError, UsageError
from .features import FeatureVector, concat_features, ela_lite, latent_as_features
from .sampling import normalize_array, rescale, sobol_points
from .vae import ModelWeights, encode_batch

FEATURESETS = ("ae", "vae", "ela", "ela+vae", "ela+ae")
TRAIN_INSTANCES = tuple(range(1, 101))
VALIDATION_INSTANCES = tuple(range(101, 121))


@dataclass
class LabeledDataset:
    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...] = ()
    class_names: tuple[str, ...] = ()

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise DimensionError(f"X has shape {self.X.shape} but y has {self.y.shape[0]} labels")
        if self.y.size and self.y.min() < 0:
            raise UsageError("class ids must be non-negative")
        if not self.feature_names:
            self.feature_names = tuple(f"f{i}" for i in range(self.X.shape[1]))
        if not self.class_names:
            k = int(self.y.max()) + 1 if self.y.size else 0
            self.class_names = tuple(str(i) for i in range(k))

    @property
    def n_classes(self) -> int:
        return len(self.class_names)


@dataclass
class DecisionTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray  # nodes x classes, training samples reaching each node

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] < 0

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.nonzero(active)[0]
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active[idx] = self.feature[node[idx]] >= 0
        return node

    def predict(self, X) -> np.ndarray:
        leaves = self.apply(np.asarray(X, dtype=np.float64))
        return np.argmax(self.counts[leaves], axis=1)


def _best_split(Xn: np.ndarray, yn: np.ndarray, k: int, features, mtry: int):
    """Search features in the given order; stop after ``mtry`` splittable ones."""
    m = yn.shape[0]
    onehot = np.eye(k)[yn]
    total = onehot.sum(axis=0)
    nl = np.arange(1, m, dtype=np.float64)
    nr = m - nl
    best = (math.inf, -1, 0.0)
    seen = 0
    for f in features:
        xs = Xn[:, f]
        order = np.argsort(xs, kind="stable")
        xs_sorted = xs[order]
        valid = xs_sorted[:-1] < xs_sorted[1:]
        if not valid.any():
            continue
        seen += 1
        left = np.cumsum(onehot[order], axis=0)[:-1]
        right = total - left
        score = (nl - (left**2).sum(axis=1) / nl) + (nr - (right**2).sum(axis=1) / nr)
        score[~valid] = math.inf
        i = int(np.argmin(score))
        if score[i] < best[0]:
            lo, hi = xs_sorted[i], xs_sorted[i + 1]
            thr = 0.5 * (lo + hi)
            if not lo <= thr < hi:
                thr = lo
            best = (float(score[i]), int(f), float(thr))
        if seen >= mtry:
            break
    return best


def build_tree(X: np.ndarray, y: np.ndarray, n_classes: int, rng: np.random.Generator, mtry: int) -> DecisionTree:
    p = X.shape[1]
    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append(np.bincount(y[idx], minlength=n_classes))
        return len(feature) - 1

    stack = [(new_node(np.arange(X.shape[0])), np.arange(X.shape[0]))]
    while stack:
        node, idx = stack.pop()
        if idx.size < 2 or np.count_nonzero(counts[node]) <= 1:
            continue
        _, f, thr = _best_split(X[idx], y[idx], n_classes, rng.permutation(p), mtry)
        if f < 0:
            continue
        go_left = X[idx, f] <= thr
        li, ri = idx[go_left], idx[~go_left]
        feature[node], threshold[node] = f, thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri))
        stack.append((left[node], li))
    return DecisionTree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(counts, dtype=np.int64).reshape(len(feature), n_classes),
    )


@dataclass
class ForestModel:
    trees: list[DecisionTree]
    n_classes: int
    n_features: int
    seed: int
    mtry: int
    bootstrap: bool = True

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def votes(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionError(f"expected {self.n_features} features, got shape {X.shape}")
        tally = np.zeros((X.shape[0], self.n_classes), dtype=np.int64)
        rows = np.arange(X.shape[0])
        for tree in self.trees:
            np.add.at(tally, (rows, tree.predict(X)), 1)
        return tally


def train_forest(
    data: LabeledDataset,
    n_trees: int = 100,
    seed: int = 0,
    bootstrap: bool = True,
    max_features: int | None = None,
) -> ForestModel:
    X, y = data.X, data.y
    if not np.all(np.isfinite(X)):
        raise NonFiniteInputError("feature matrix contains non-finite values")
    if np.unique(y).size < 2:
        raise DegenerateDataError("training data must contain at least two classes")
    if n_trees < 1:
        raise UsageError("a forest needs at least one tree")
    N, p = X.shape
    mtry = max_features or max(1, int(math.isqrt(p)))
    trees = []
    for t in range(n_trees):
        rng = np.random.Generator(np.random.PCG64([seed, t]))
        idx = rng.integers(0, N, size=N) if bootstrap else np.arange(N)
        trees.append(build_tree(X[idx], y[idx], data.n_classes, rng, mtry))
    return ForestModel(trees, data.n_classes, p, seed, mtry, bootstrap)


def predict(model: ForestModel, X) -> np.ndarray:
    """Majority vote of the trees' leaf-majority classes; ties go to the lower id."""
    return np.argmax(model.votes(X), axis=1)


def macro_f1(y_true, y_pred) -> float:
    """Unweighted mean of per-class F1 over classes seen in either vector."""
    t = np.asarray(y_true)
    p = np.asarray(y_pred)
    if t.shape != p.shape:
        raise DimensionError(f"label vectors differ in length: {t.shape} vs {p.shape}")
    classes = np.union1d(t, p)
    if classes.size == 0:
        return 0.0
    scores = []
    for c in classes:
        tp = np.sum((t == c) & (p == c))
        fp = np.sum((t != c) & (p == c))
        fn = np.sum((t == c) & (p != c))
        scores.append(2.0 * tp / (2.0 * tp + fp + fn))
    return float(np.mean(scores))


# -- BBOB property tasks -----------------------------------------------------

@dataclass
class BbobLandscapes:
    """Normalized DoE values of BBOB problems, keyed by (fid, instance)."""

    d: int
    m: int
    keys: list[tuple[int, int]]
    values: np.ndarray
    design: np.ndarray  # unit-cube points

    def rows(self, instances) -> np.ndarray:
        wanted = set(instances)
        return np.array([i for i, (_, inst) in enumerate(self.keys) if inst in wanted], dtype=np.int64)


def bbob_landscapes(d: int, m: int, instances, fids=bbob.FIDS, lower=-5.0, upper=5.0) -> BbobLandscapes:
    doe = sobol_points(m, d)
    pts = rescale(doe, lower, upper)
    keys, vals = [], []
    for fid in fids:
        for inst in instances:
            keys.append((fid, inst))
            vals.append(normalize_array(bbob.evaluate_bbob(bbob.make_problem(fid, inst, d), pts)))
    return BbobLandscapes(d, m, keys, np.array(vals), doe.points)


def feature_matrix(land: BbobLandscapes, featureset: str, model: ModelWeights | None = None):
    """Rows of features for every landscape plus their names."""
    if featureset not in FEATURESETS:
        raise UsageError(f"featureset must be one of {FEATURESETS}, got {featureset!r}")
    needs_model = featureset != "ela"
    latent = None
    if needs_model:
        kind = featureset.split("+")[-1]
        if model is None:
            raise ConfigurationError(f"featureset {featureset!r} needs a trained {kind} model")
        if model.kind != kind:
            raise ConfigurationError(f"featureset {featureset!r} needs a {kind} model, got {model.kind}")
        if model.n != land.values.shape[1]:
            raise ConfigurationError(f"model expects n={model.n}, design has {land.values.shape[1]} points")
        latent = encode_batch(model, land.values)
    rows: list[FeatureVector] = []
    for i, y in enumerate(land.values):
        parts = []
        if featureset.startswith("ela"):
            parts.append(ela_lite(land.design, y))
        if latent is not None:
            parts.append(latent_as_features(latent[i]))
        fv = parts[0] if len(parts) == 1 else concat_features(*parts)
        rows.append(fv)
    return np.stack([r.values for r in rows]), rows[0].names


@dataclass
class TaskResult:
    dim: int
    task: str
    featureset: str
    seeds: list[int]
    scores: list[float]
    n_features: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def mean(self) -> float:
        return float(np.mean(self.scores)) if self.scores else math.nan

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["dim", "task", "featureset", "seed", "macro_f1"])
        for s, f in zip(self.seeds, self.scores):
            writer.writerow([self.dim, self.task, self.featureset, s, f"{f:.17g}"])
        writer.writerow([self.dim, self.task, self.featureset, "mean", f"{self.mean:.17g}"])
        return buf.getvalue()


def run_task(
    dim: int,
    task: str,
    featureset: str,
    model: ModelWeights | None = None,
    seeds=(0,),
    m: int | None = None,
    n_trees: int = 100,
    landscapes: BbobLandscapes | None = None,
    features: tuple[np.ndarray, tuple] | None = None,
    shuffle_labels: bool = False,
) -> TaskResult:
    """Train on instances 1-100 of all 24 functions, score macro F1 on 101-120.

    ``landscapes``/``features`` let callers reuse precomputed inputs.  With
    ``shuffle_labels`` the training labels are permuted (a chance-level control).
    """
    if task not in bbob.PROPERTIES:
        raise UsageError(f"task must be one of {sorted(bbob.PROPERTIES)}, got {task!r}")
    if m is None:
        m = int(round(math.log2(model.n))) if model is not None else 8
    if landscapes is None:
        landscapes = bbob_landscapes(dim, m, TRAIN_INSTANCES + VALIDATION_INSTANCES)
    X, names = features if features is not None else feature_matrix(landscapes, featureset, model)
    labels = np.array([bbob.property_class(fid, task) for fid, _ in landscapes.keys])
    tr = landscapes.rows(TRAIN_INSTANCES)
    va = landscapes.rows(VALIDATION_INSTANCES)
    classes = bbob.PROPERTIES[task]
    scores = []
    for seed in seeds:
        y_train = labels[tr]
        if shuffle_labels:
            y_train = np.random.Generator(np.random.PCG64([seed, 0xF00D])).permutation(y_train)
        data = LabeledDataset(X[tr], y_train, tuple(names), classes)
        forest = train_forest(data, n_trees=n_trees, seed=seed)
        scores.append(macro_f1(labels[va], predict(forest, X[va])))
    return TaskResult(dim, task, featureset, list(seeds), scores, X.shape[1])
