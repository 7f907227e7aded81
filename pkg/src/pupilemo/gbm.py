"""Multinomial gradient boosting over CART regression trees.

Each stage fits one regression tree per class to the residuals
``1[y = k] - softmax(F)_k`` on a shared row subsample, using the Friedman
split improvement ``n_l n_r / (n_l + n_r) * (mean_l - mean_r)^2``. Leaves
then take the one-step Newton value

    gamma = (K - 1) / K * sum(r) / sum(|r| (1 - |r|))

and the scores move by ``learning_rate * gamma``.

Randomness: every draw comes from a PCG64 generator seeded with
``SeedSequence(seed, spawn_key=...)``. The stage-m row subsample uses
spawn key ``(m,)``; the feature draw at node ``j`` of class ``k``'s tree in
stage ``m`` uses ``(m, k, j)``, where nodes are numbered heap-style (root 0,
children ``2j + 1`` and ``2j + 2``).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np

from pupilemo.errors import InputError, OutOfRange, SingleClassInput, WidthMismatch
from pupilemo.labels import N_CLASSES, TOKENS

FORMAT_NAME = "pupilemo-gbm"
FORMAT_VERSION = 1
_PRIOR_FLOOR = 1e-12


@dataclass(frozen=True)
class Hyperparams:
    max_depth: int = 5
    learning_rate: float = 0.05
    n_estimators: int = 20
    max_features: int = 7
    min_samples_split: int = 200
    min_samples_leaf: int = 30
    subsample: float = 0.8
    seed: int = 10

    def validate(self, n_features: Optional[int] = None) -> None:
        if not 0 <= self.learning_rate <= 1:
            raise ValueError("learning_rate must lie in [0, 1]")
        if not 0 < self.subsample <= 1:
            raise ValueError("subsample must lie in (0, 1]")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be at least 1")
        if self.min_samples_split < 2 * self.min_samples_leaf:
            raise ValueError("min_samples_split must be at least 2 * min_samples_leaf")
        if self.max_depth < 0 or self.n_estimators < 0:
            raise ValueError("max_depth and n_estimators must be non-negative")
        if self.max_features < 1 or (n_features is not None and self.max_features > n_features):
            raise ValueError(f"max_features must lie in [1, {n_features}]")

    def for_width(self, n_features: int) -> "Hyperparams":
        """Same settings with max_features clipped to the available columns."""
        return replace(self, max_features=min(self.max_features, n_features))


@dataclass(frozen=True)
class Leaf:
    value: float
    n_samples: int


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    left: "Node"
    right: "Node"
    n_samples: int


Node = Union[Leaf, Split]


def _generator(seed: int, key: tuple) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def friedman_improvement(n_left, n_right, mean_left, mean_right):
    return n_left * n_right / (n_left + n_right) * (mean_left - mean_right) ** 2


def _best_split(X, y, features, min_leaf):
    n = y.size
    total = y.sum()
    n_left = np.arange(1, n, dtype=np.float64)
    n_right = n - n_left
    size_ok = (n_left >= min_leaf) & (n_right >= min_leaf)
    best_gain, best = 0.0, None
    for f in features:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        left_sum = np.cumsum(y[order])[:-1]
        gain = friedman_improvement(n_left, n_right, left_sum / n_left, (total - left_sum) / n_right)
        gain = np.where(size_ok & (xs[1:] > xs[:-1]), gain, -np.inf)
        i = int(np.argmax(gain))
        if gain[i] > best_gain:
            lo, hi = xs[i], xs[i + 1]
            threshold = 0.5 * (lo + hi)
            if not lo <= threshold < hi:
                threshold = lo
            best_gain, best = float(gain[i]), (int(f), float(threshold))
    return best_gain, best


def fit_regression_tree(X, targets, hp: Hyperparams, stream: tuple = (0, 0),
                        leaf_value: Optional[Callable[[np.ndarray], float]] = None) -> Node:
    """Greedy top-down CART regression tree.

    Parameters
    ----------
    X : ndarray (n, d)
    targets : ndarray (n,)
    hp : Hyperparams
        Uses max_depth, max_features, min_samples_split, min_samples_leaf
        and seed.
    stream : tuple
        Leading spawn-key entries for the per-node feature draws.
    leaf_value : callable, optional
        Maps the row indices that reach a leaf to its value. Defaults to
        the mean target.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    d = X.shape[1]
    n_draw = min(hp.max_features, d)
    if leaf_value is None:
        def leaf_value(idx):
            return float(y[idx].mean()) if idx.size else 0.0

    def grow(idx: np.ndarray, depth: int, node_id: int) -> Node:
        n = idx.size
        yn = y[idx]
        if (depth >= hp.max_depth or n < hp.min_samples_split or n < 2 * hp.min_samples_leaf
                or yn.max() == yn.min()):
            return Leaf(leaf_value(idx), n)
        rng = _generator(hp.seed, tuple(stream) + (node_id,))
        features = rng.choice(d, size=n_draw, replace=False)
        gain, split = _best_split(X[idx], yn, features, hp.min_samples_leaf)
        centered = yn - yn.mean()
        if split is None or gain <= 1e-12 * float(centered @ centered):
            return Leaf(leaf_value(idx), n)
        f, threshold = split
        go_left = X[idx, f] <= threshold
        return Split(f, threshold,
                     grow(idx[go_left], depth + 1, 2 * node_id + 1),
                     grow(idx[~go_left], depth + 1, 2 * node_id + 2), n)

    return grow(np.arange(y.size), 0, 0)


def predict_tree(node: Node, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    out = np.empty(X.shape[0])

    def walk(node, idx):
        if isinstance(node, Leaf):
            out[idx] = node.value
            return
        mask = X[idx, node.feature] <= node.threshold
        walk(node.left, idx[mask])
        walk(node.right, idx[~mask])

    walk(node, np.arange(X.shape[0]))
    return out


def tree_depth(node: Node) -> int:
    if isinstance(node, Leaf):
        return 0
    return 1 + max(tree_depth(node.left), tree_depth(node.right))


def tree_leaves(node: Node) -> list[Leaf]:
    if isinstance(node, Leaf):
        return [node]
    return tree_leaves(node.left) + tree_leaves(node.right)


def softmax(F: np.ndarray) -> np.ndarray:
    Z = F - F.max(axis=-1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=-1, keepdims=True)


def multinomial_deviance(F, y) -> float:
    """Mean ``-log softmax(F)[y]`` over rows."""
    F = np.atleast_2d(np.asarray(F, dtype=np.float64))
    y = np.asarray(y, dtype=np.int64).reshape(-1)
    Z = F - F.max(axis=1, keepdims=True)
    log_p = Z - np.log(np.exp(Z).sum(axis=1, keepdims=True))
    return float(-log_p[np.arange(y.size), y].mean())


def residuals(F, y) -> np.ndarray:
    """Negative gradient of the summed deviance: ``onehot(y) - softmax(F)``."""
    F = np.atleast_2d(np.asarray(F, dtype=np.float64))
    y = np.asarray(y, dtype=np.int64).reshape(-1)
    R = -softmax(F)
    R[np.arange(y.size), y] += 1.0
    return R


def newton_leaf(r: np.ndarray, n_classes: int = N_CLASSES) -> float:
    num = r.sum()
    den = (np.abs(r) * (1.0 - np.abs(r))).sum()
    if den == 0.0:
        return 0.0
    return float((n_classes - 1) / n_classes * num / den)


def fingerprint(names: Sequence[str]) -> str:
    return hashlib.sha256("\n".join(names).encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class GbmModel:
    priors: np.ndarray                      # log class priors, canonical label order
    stages: tuple[tuple[Node, ...], ...]    # one tree per class per stage
    learning_rate: float
    feature_names: tuple[str, ...]
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    train_deviance: tuple[float, ...] = ()  # entry 0 is the prior-only model

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def fingerprint(self) -> str:
        return fingerprint(self.feature_names)

    @property
    def n_stages(self) -> int:
        return len(self.stages)

    def check_features(self, names: Sequence[str]) -> None:
        if len(names) != self.n_features or fingerprint(names) != self.fingerprint:
            raise WidthMismatch("feature columns differ from those the model was trained on")


def fit(X, y, hp: Hyperparams = Hyperparams(), feature_names: Optional[Sequence[str]] = None) -> GbmModel:
    """Fit a four-class boosted model.

    Scores start at the log class priors. Every stage draws one subsample of
    ``floor(subsample * N)`` rows without replacement, shared by the K class
    trees.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n, d = X.shape
    hp.validate(d)
    if y.shape != (n,):
        raise ValueError("y must have one label per row")
    if y.min() < 0 or y.max() >= N_CLASSES:
        raise ValueError(f"labels must lie in 0..{N_CLASSES - 1}")
    counts = np.bincount(y, minlength=N_CLASSES)
    if (counts > 0).sum() < 2:
        raise SingleClassInput("boosting needs at least two classes in the training rows")
    if feature_names is None:
        feature_names = [f"f{j}" for j in range(d)]
    elif len(feature_names) != d:
        raise WidthMismatch("feature_names length differs from the column count")

    priors = np.log(np.maximum(counts / n, _PRIOR_FLOOR))
    F = np.tile(priors, (n, 1))
    deviance = [multinomial_deviance(F, y)]
    n_sub = int(np.floor(hp.subsample * n))
    stages = []
    for m in range(hp.n_estimators):
        R = residuals(F, y)
        if n_sub < n:
            sub = np.sort(_generator(hp.seed, (m,)).choice(n, size=n_sub, replace=False))
        else:
            sub = np.arange(n)
        Xs = X[sub]
        trees = []
        for k in range(N_CLASSES):
            rk = R[sub, k]
            tree = fit_regression_tree(Xs, rk, hp, stream=(m, k),
                                       leaf_value=lambda idx, rk=rk: newton_leaf(rk[idx]))
            F[:, k] += hp.learning_rate * predict_tree(tree, X)
            trees.append(tree)
        stages.append(tuple(trees))
        deviance.append(multinomial_deviance(F, y))
    return GbmModel(priors, tuple(stages), hp.learning_rate, tuple(feature_names), hp, tuple(deviance))


def _check_width(model: GbmModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.n_features:
        raise WidthMismatch(f"model expects {model.n_features} features, got {X.shape[1]}")
    return X


def _stage_scores(model: GbmModel, stage, X) -> np.ndarray:
    return np.column_stack([predict_tree(t, X) for t in stage])


def decision_function(model: GbmModel, X) -> np.ndarray:
    X = _check_width(model, X)
    F = np.tile(model.priors, (X.shape[0], 1))
    for stage in model.stages:
        F += model.learning_rate * _stage_scores(model, stage, X)
    return F


def predict_proba(model: GbmModel, X) -> np.ndarray:
    return softmax(decision_function(model, X))


def predict(model: GbmModel, X) -> np.ndarray:
    # argmax returns the first maximum, i.e. the lower label id on ties
    return np.argmax(decision_function(model, X), axis=1)


def staged_decision_function(model: GbmModel, X):
    X = _check_width(model, X)
    F = np.tile(model.priors, (X.shape[0], 1))
    for stage in model.stages:
        F = F + model.learning_rate * _stage_scores(model, stage, X)
        yield F


def staged_predict_proba(model: GbmModel, X):
    for F in staged_decision_function(model, X):
        yield softmax(F)


def staged_predict(model: GbmModel, X) -> list[np.ndarray]:
    """Predicted labels after each stage; element m-1 uses stages 1..m."""
    return [np.argmax(F, axis=1) for F in staged_decision_function(model, X)]


def stage_errors(staged: Sequence[np.ndarray], y_eval) -> np.ndarray:
    """Mean squared error between integer label codes, per stage."""
    y = np.asarray(y_eval, dtype=np.float64)
    return np.array([float(((np.asarray(p, dtype=np.float64) - y) ** 2).mean()) for p in staged])


def argmin_stage(errors: Sequence[float]) -> int:
    """1-based index of the smallest error, earliest on ties."""
    errors = np.asarray(errors, dtype=np.float64)
    if errors.size == 0:
        raise ValueError("no stages to choose from")
    return int(np.argmin(errors)) + 1


def select_best_stage(staged: Sequence[np.ndarray], y_eval) -> int:
    """Stage count minimizing label-code MSE on the evaluation rows.

    Label-code MSE treats the class ids as ordered numbers, which they are
    not; :func:`select_best_stage_deviance` is the likelihood-based
    alternative.
    """
    return argmin_stage(stage_errors(staged, y_eval))


def select_best_stage_deviance(model: GbmModel, X, y_eval) -> int:
    errors = [multinomial_deviance(F, y_eval) for F in staged_decision_function(model, X)]
    return argmin_stage(errors)


def select_stage(model: GbmModel, X, y_eval, rule: str = "mse") -> int:
    if rule == "mse":
        return select_best_stage(staged_predict(model, X), y_eval)
    if rule == "deviance":
        return select_best_stage_deviance(model, X, y_eval)
    raise ValueError(f"unknown stage selection rule {rule!r}")


def truncate(model: GbmModel, n: int) -> GbmModel:
    if not 1 <= n <= model.n_stages:
        raise OutOfRange(f"stage count must lie in [1, {model.n_stages}], got {n}")
    return replace(model, stages=model.stages[:n], train_deviance=model.train_deviance[:n + 1])


# Serialization: a JSON document; floats are written with repr precision
# so a reloaded model predicts bit-identically.

def _node_to_dict(node: Node) -> dict:
    if isinstance(node, Leaf):
        return {"value": node.value, "n": node.n_samples}
    return {"feature": node.feature, "threshold": node.threshold, "n": node.n_samples,
            "left": _node_to_dict(node.left), "right": _node_to_dict(node.right)}


def _node_from_dict(d: dict) -> Node:
    if "value" in d:
        return Leaf(float(d["value"]), int(d["n"]))
    return Split(int(d["feature"]), float(d["threshold"]),
                 _node_from_dict(d["left"]), _node_from_dict(d["right"]), int(d["n"]))


def dumps(model: GbmModel) -> str:
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "label_order": list(TOKENS),
        "catalog_fingerprint": model.fingerprint,
        "feature_names": list(model.feature_names),
        "hyperparams": asdict(model.hyperparams),
        "learning_rate": model.learning_rate,
        "priors": [float(p) for p in model.priors],
        "train_deviance": list(model.train_deviance),
        "stages": [[_node_to_dict(t) for t in stage] for stage in model.stages],
    }
    return json.dumps(doc, indent=1) + "\n"


def loads(text: str) -> GbmModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"model file is not valid JSON: {e}") from None
    if doc.get("format") != FORMAT_NAME or doc.get("version") != FORMAT_VERSION:
        raise InputError("unsupported model format or version")
    if doc["label_order"] != list(TOKENS):
        raise InputError("model label order differs from the canonical order")
    names = tuple(doc["feature_names"])
    if fingerprint(names) != doc["catalog_fingerprint"]:
        raise InputError("model catalog fingerprint does not match its feature names")
    stages = tuple(tuple(_node_from_dict(t) for t in stage) for stage in doc["stages"])
    return GbmModel(np.array(doc["priors"], dtype=np.float64), stages, float(doc["learning_rate"]),
                    names, Hyperparams(**doc["hyperparams"]), tuple(doc["train_deviance"]))


def save(model: GbmModel, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(model))


def load(path) -> GbmModel:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
