"""Native classifier suite (kNN, decision tree, random forest, Gaussian NB).

Every kind trains deterministically from ``(spec.seed, dataset)`` and
documents its tie-breaking rules, so identical inputs give identical
predictions across runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Mapping

import numpy as np

from .dataset import Dataset

KINDS = ("knn", "decision_tree", "random_forest", "gaussian_nb")

_TREE_DEFAULTS = {
    "max_depth": 30,
    "min_samples_split": 2,
    "min_samples_leaf": 1,
}

_DEFAULTS: dict[str, dict[str, Any]] = {
    "knn": {"n_neighbors": 3},
    "decision_tree": dict(_TREE_DEFAULTS),
    "random_forest": {
        **_TREE_DEFAULTS,
        "n_trees": 10,
        "bootstrap": True,
        "max_features": "sqrt",
    },
    "gaussian_nb": {"var_smoothing": 1e-9},
}


def _validate_hyperparameters(kind: str, params: dict[str, Any]) -> dict[str, Any]:
    defaults = _DEFAULTS[kind]
    unknown = set(params) - set(defaults)
    if unknown:
        raise ValueError(f"unknown {kind} hyperparameters: {sorted(unknown)}")
    merged = {**defaults, **params}
    if kind == "knn":
        if int(merged["n_neighbors"]) < 1:
            raise ValueError("n_neighbors must be >= 1")
        merged["n_neighbors"] = int(merged["n_neighbors"])
    if kind in ("decision_tree", "random_forest"):
        if int(merged["max_depth"]) < 1:
            raise ValueError("max_depth must be >= 1")
        if int(merged["min_samples_split"]) < 2:
            raise ValueError("min_samples_split must be >= 2")
        if int(merged["min_samples_leaf"]) < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        for key in ("max_depth", "min_samples_split", "min_samples_leaf"):
            merged[key] = int(merged[key])
    if kind == "random_forest":
        if int(merged["n_trees"]) < 1:
            raise ValueError("n_trees must be >= 1")
        merged["n_trees"] = int(merged["n_trees"])
        merged["bootstrap"] = bool(merged["bootstrap"])
        mf = merged["max_features"]
        if isinstance(mf, str):
            if mf not in ("sqrt", "all"):
                raise ValueError("max_features must be 'sqrt', 'all', or a positive int")
        elif int(mf) < 1:
            raise ValueError("max_features must be >= 1")
        else:
            merged["max_features"] = int(mf)
    if kind == "gaussian_nb":
        if float(merged["var_smoothing"]) < 0:
            raise ValueError("var_smoothing must be >= 0")
        merged["var_smoothing"] = float(merged["var_smoothing"])
    return merged


@dataclass(frozen=True)
class ClassifierSpec:
    """Declarative classifier configuration: kind, hyperparameters, seed."""

    kind: str
    hyperparameters: dict[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown classifier kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(
            self, "hyperparameters", _validate_hyperparameters(self.kind, dict(self.hyperparameters))
        )

    def with_seed(self, seed: int) -> "ClassifierSpec":
        return replace(self, seed=int(seed))

    @classmethod
    def from_config(cls, config: Mapping[str, Any]) -> "ClassifierSpec":
        """Parse a spec from an experiment-config mapping (kind + optional overrides)."""
        raw = dict(config)
        kind = raw.pop("kind", None)
        if kind is None:
            raise ValueError("classifier config needs a 'kind' entry")
        seed = int(raw.pop("seed", 0))
        return cls(kind=str(kind), hyperparameters=raw, seed=seed)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "seed": self.seed, **self.hyperparameters}


@dataclass(frozen=True)
class TrainedModel:
    spec: ClassifierSpec
    class_labels: tuple[str, ...]
    dimension: int
    state: Any


class _TreeNode:
    __slots__ = ("feature", "threshold", "left", "right", "label_code")

    def __init__(self, feature=None, threshold=None, left=None, right=None, label_code=None):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.label_code = label_code

    def depth(self) -> int:
        if self.label_code is not None:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())


def _best_split(X, y_codes, n_classes, feature_indices, min_leaf):
    """Lowest-weighted-gini split over the given features.

    Ties keep the first candidate found, i.e. the lowest feature index and,
    within a feature, the lowest threshold.
    """
    n = X.shape[0]
    onehot_cache = None
    best_score = math.inf
    best = None
    for f in feature_indices:
        col = X[:, f]
        order = np.argsort(col, kind="stable")
        xs = col[order]
        if xs[0] == xs[-1]:
            continue
        if onehot_cache is None:
            onehot_cache = np.zeros((n, n_classes), dtype=np.float64)
        onehot = onehot_cache
        onehot.fill(0.0)
        onehot[np.arange(n), y_codes[order]] = 1.0
        cum = np.cumsum(onehot, axis=0)
        positions = np.flatnonzero(xs[:-1] < xs[1:])
        if min_leaf > 1:
            n_left = positions + 1
            keep = (n_left >= min_leaf) & (n - n_left >= min_leaf)
            positions = positions[keep]
        if positions.size == 0:
            continue
        left = cum[positions]
        n_left = (positions + 1).astype(np.float64)
        right = cum[-1] - left
        n_right = n - n_left
        gini_left = 1.0 - np.sum((left / n_left[:, None]) ** 2, axis=1)
        gini_right = 1.0 - np.sum((right / n_right[:, None]) ** 2, axis=1)
        weighted = (n_left * gini_left + n_right * gini_right) / n
        j = int(np.argmin(weighted))
        if weighted[j] < best_score:
            best_score = weighted[j]
            pos = positions[j]
            best = (int(f), float((xs[pos] + xs[pos + 1]) / 2.0))
    return best


def _grow_tree(X, y_codes, n_classes, depth, params, rng):
    counts = np.bincount(y_codes, minlength=n_classes)
    majority = int(np.argmax(counts))  # first argmax = lexicographically smallest label
    n, d = X.shape
    if (
        depth >= params["max_depth"]
        or n < params["min_samples_split"]
        or counts[majority] == n
    ):
        return _TreeNode(label_code=majority)
    max_features = params.get("max_features", "all")
    if max_features == "all":
        m = d
    elif max_features == "sqrt":
        m = max(1, int(math.sqrt(d)))
    else:
        m = min(int(max_features), d)
    if rng is None or m >= d:
        feature_indices = np.arange(d)
    else:
        feature_indices = np.sort(rng.choice(d, size=m, replace=False))
    split = _best_split(X, y_codes, n_classes, feature_indices, params["min_samples_leaf"])
    if split is None:
        return _TreeNode(label_code=majority)
    f, thr = split
    mask = X[:, f] <= thr
    left = _grow_tree(X[mask], y_codes[mask], n_classes, depth + 1, params, rng)
    right = _grow_tree(X[~mask], y_codes[~mask], n_classes, depth + 1, params, rng)
    return _TreeNode(feature=f, threshold=thr, left=left, right=right)


def _tree_predict_codes(node: _TreeNode, X) -> np.ndarray:
    out = np.empty(X.shape[0], dtype=np.intp)
    for i, row in enumerate(X):
        cur = node
        while cur.label_code is None:
            cur = cur.left if row[cur.feature] <= cur.threshold else cur.right
        out[i] = cur.label_code
    return out


def _encode_labels(d: Dataset) -> tuple[tuple[str, ...], np.ndarray]:
    classes = d.class_labels
    lookup = {c: i for i, c in enumerate(classes)}
    codes = np.array([lookup[c] for c in d.labels], dtype=np.intp)
    return classes, codes


def train(spec: ClassifierSpec, d: Dataset) -> TrainedModel:
    """Fit ``spec`` on ``d``. Deterministic given ``(spec.seed, d)``."""
    classes, codes = _encode_labels(d)
    X = d.features
    params = spec.hyperparameters
    if spec.kind in ("decision_tree", "random_forest") and len(classes) < 2:
        raise ValueError(f"{spec.kind} training needs at least 2 classes, got {len(classes)}")
    if spec.kind == "knn":
        state = (X, codes)
    elif spec.kind == "decision_tree":
        state = _grow_tree(X, codes, len(classes), 0, {**params, "max_features": "all"}, None)
    elif spec.kind == "random_forest":
        trees = []
        n = X.shape[0]
        for t in range(params["n_trees"]):
            rng = np.random.default_rng(spec.seed + t)
            if params["bootstrap"]:
                idx = rng.integers(0, n, size=n)
                Xt, yt = X[idx], codes[idx]
            else:
                Xt, yt = X, codes
            trees.append(_grow_tree(Xt, yt, len(classes), 0, params, rng))
        state = trees
    elif spec.kind == "gaussian_nb":
        n_classes = len(classes)
        means = np.empty((n_classes, X.shape[1]))
        variances = np.empty((n_classes, X.shape[1]))
        priors = np.empty(n_classes)
        for c in range(n_classes):
            Xc = X[codes == c]
            means[c] = Xc.mean(axis=0)
            variances[c] = Xc.var(axis=0)
            priors[c] = Xc.shape[0] / X.shape[0]
        epsilon = params["var_smoothing"] * float(X.var(axis=0).max())
        variances += epsilon
        variances[variances <= 0.0] = 1e-12  # all-constant training data
        state = (np.log(priors), means, variances)
    else:  # pragma: no cover - guarded by ClassifierSpec
        raise ValueError(f"unknown classifier kind {spec.kind!r}")
    return TrainedModel(spec=spec, class_labels=classes, dimension=d.dimension, state=state)


def _check_inputs(m: TrainedModel, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != m.dimension:
        raise ValueError(f"input dimension {X.shape[1]} != training dimension {m.dimension}")
    if not np.all(np.isfinite(X)):
        raise ValueError("prediction input must be finite")
    return X


def _knn_predict_codes(m: TrainedModel, X: np.ndarray) -> np.ndarray:
    Xt, codes = m.state
    k = min(m.spec.hyperparameters["n_neighbors"], Xt.shape[0])
    n_classes = len(m.class_labels)
    row_ids = np.arange(Xt.shape[0])
    out = np.empty(X.shape[0], dtype=np.intp)
    for i, x in enumerate(X):
        diffs = Xt - x
        dist2 = np.einsum("ij,ij->i", diffs, diffs)
        order = np.lexsort((row_ids, dist2))[:k]
        votes = np.bincount(codes[order], minlength=n_classes)
        top = votes.max()
        winners = np.flatnonzero(votes == top)
        if winners.size == 1:
            out[i] = winners[0]
        else:
            # vote tie: the nearest neighbor among the tied classes decides
            for j in order:
                if codes[j] in winners:
                    out[i] = codes[j]
                    break
    return out


def _gnb_predict_codes(m: TrainedModel, X: np.ndarray) -> np.ndarray:
    log_priors, means, variances = m.state
    # joint log likelihood, classes along axis 1; ties go to the smaller code
    ll = log_priors[None, :] - 0.5 * (
        np.log(2.0 * np.pi * variances)[None, :, :]
        + (X[:, None, :] - means[None, :, :]) ** 2 / variances[None, :, :]
    ).sum(axis=2)
    return np.argmax(ll, axis=1)


def _forest_predict_codes(m: TrainedModel, X: np.ndarray) -> np.ndarray:
    votes = np.zeros((X.shape[0], len(m.class_labels)), dtype=np.intp)
    for tree in m.state:
        pred = _tree_predict_codes(tree, X)
        votes[np.arange(X.shape[0]), pred] += 1
    return np.argmax(votes, axis=1)  # tie -> lexicographically smallest label


def predict_many(m: TrainedModel, X) -> np.ndarray:
    """Predict a label for every row of ``X``."""
    X = _check_inputs(m, X)
    kind = m.spec.kind
    if kind == "knn":
        codes = _knn_predict_codes(m, X)
    elif kind == "decision_tree":
        codes = _tree_predict_codes(m.state, X)
    elif kind == "random_forest":
        codes = _forest_predict_codes(m, X)
    else:
        codes = _gnb_predict_codes(m, X)
    labels = np.array(m.class_labels, dtype=str)
    return labels[codes]


def predict(m: TrainedModel, x) -> str:
    """Predict the label of a single feature vector."""
    return str(predict_many(m, np.asarray(x, dtype=np.float64).reshape(1, -1))[0])


def tree_max_path_length(m: TrainedModel) -> int:
    """Longest root-to-leaf split count (decision tree or forest)."""
    if m.spec.kind == "decision_tree":
        return m.state.depth()
    if m.spec.kind == "random_forest":
        return max(t.depth() for t in m.state)
    raise ValueError(f"{m.spec.kind} has no tree depth")
