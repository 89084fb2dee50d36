"""CART trees, bagged forests, and gradient boosting on the shared kernel.

Splits maximize variance reduction (regression) or Gini decrease (binary
classification), considering only cuts between strictly increasing adjacent
feature values and breaking exact gain ties toward the lowest feature index
and threshold. All randomness (bootstrap rows, per-node feature subsets) is
drawn up front from seeded generators, so fits are reproducible bit for bit
on both kernel lanes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels
from ..errors import DataError
from ..mathutil import log_loss, sigmoid
from ..seeding import derive_rng
from ._validate import check_matrix, check_target

__all__ = [
    "TreeParams",
    "DecisionTree",
    "ConstantModel",
    "RandomForestModel",
    "GradientBoostedModel",
    "fit_tree",
    "fit_random_forest",
    "fit_gbm",
    "PROB_CLIP",
]

# Boosted probabilities and degenerate base rates live in this closed interval.
PROB_CLIP = 1e-6

_HESS_FLOOR = 1e-12


@dataclass(frozen=True)
class TreeParams:
    """Shared knobs for trees, forests, and boosting."""

    max_depth: int = 4
    n_trees: int = 50
    learning_rate: float = 0.3
    min_samples_leaf: int = 1
    feature_subsample: str | None = None  # "sqrt" | "third" | "all"; None = model default
    seed: int = 0

    def __post_init__(self):
        if self.max_depth < 1:
            raise DataError(f"max_depth must be >= 1, got {self.max_depth}")
        if self.n_trees < 1:
            raise DataError(f"n_trees must be >= 1, got {self.n_trees}")
        if not 0.0 < self.learning_rate <= 1.0:
            raise DataError(f"learning_rate must be in (0, 1], got {self.learning_rate}")
        if self.min_samples_leaf < 1:
            raise DataError(f"min_samples_leaf must be >= 1, got {self.min_samples_leaf}")
        if self.feature_subsample not in (None, "sqrt", "third", "all"):
            raise DataError(f"unknown feature_subsample {self.feature_subsample!r}")


@dataclass(frozen=True)
class DecisionTree:
    """Flat-array binary tree; leaves have feature -1."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    count: np.ndarray
    n_features: int
    task: str

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = check_matrix(X)
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        return _kernels.predict_tree(
            self.feature, self.threshold, self.left, self.right, self.value, X
        )

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if self.task != "classification":
            raise ValueError("predict_proba requires a classification tree")
        return self.predict(X)

    def depth(self) -> int:
        depths = np.zeros(len(self.feature), dtype=np.int64)
        for node in range(len(self.feature)):
            if self.feature[node] >= 0:
                depths[self.left[node]] = depths[node] + 1
                depths[self.right[node]] = depths[node] + 1
        return int(depths.max())

    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())


@dataclass(frozen=True)
class ConstantModel:
    """Classifier that always outputs the same positive-class probability."""

    probability: float
    n_features: int = -1  # -1 accepts any width
    degenerate: bool = False

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if self.n_features >= 0 and X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        return np.full(X.shape[0], self.probability)


def _check_task(task: str) -> None:
    if task not in ("classification", "regression"):
        raise DataError(f"task must be 'classification' or 'regression', got {task!r}")


def _subsample_width(mode: str | None, default: str, d: int) -> int | None:
    mode = default if mode is None else mode
    if mode == "all":
        return None
    if mode == "sqrt":
        return max(1, int(math.sqrt(d)))
    return int(math.ceil(d / 3.0))  # "third"


def _draw_subsets(rng: np.random.Generator, d: int, width: int, m: int, max_depth: int) -> np.ndarray:
    """One ascending feature subset per potential split attempt."""
    if max_depth >= 30:
        cap = 2 * m - 1
    else:
        cap = min(2 ** (max_depth + 1) - 1, 2 * m - 1)
    cap = max(cap, 1)
    keys = rng.random((cap, d))
    picks = np.argsort(keys, axis=1)[:, :width]
    return np.sort(picks, axis=1).astype(np.int32)


def _grow(
    X: np.ndarray,
    y: np.ndarray,
    w: np.ndarray | None,
    params: TreeParams,
    criterion: int,
    subsets: np.ndarray | None,
    task: str,
    leaf_mode: str,
) -> DecisionTree:
    if w is None:
        w = np.zeros(len(y))
    raw = _kernels.build_tree(
        X,
        np.ascontiguousarray(y, dtype=np.float64),
        np.ascontiguousarray(w, dtype=np.float64),
        params.max_depth,
        params.min_samples_leaf,
        criterion,
        subsets,
    )
    if leaf_mode == "mean":
        value = raw["sum_y"] / raw["count"]
    else:  # newton: one step of sum(gradient)/sum(hessian) with a tiny floor
        value = raw["sum_y"] / np.maximum(raw["sum_w"], _HESS_FLOOR)
    return DecisionTree(
        feature=raw["feature"],
        threshold=raw["threshold"],
        left=raw["left"],
        right=raw["right"],
        value=value,
        count=raw["count"],
        n_features=X.shape[1],
        task=task,
    )


def fit_tree(
    X: np.ndarray,
    y: np.ndarray,
    params: TreeParams = TreeParams(),
    task: str = "classification",
) -> DecisionTree:
    """Fit a single CART tree; leaf values are target means (class frequency)."""
    _check_task(task)
    X = check_matrix(X)
    y = check_target(y, X.shape[0], binary=task == "classification")
    criterion = 1 if task == "classification" else 0
    width = _subsample_width(params.feature_subsample, "all", X.shape[1])
    subsets = None
    if width is not None:
        rng = derive_rng(params.seed, "tree")
        subsets = _draw_subsets(rng, X.shape[1], width, X.shape[0], params.max_depth)
    return _grow(X, y, None, params, criterion, subsets, task, "mean")


@dataclass(frozen=True)
class RandomForestModel:
    trees: list[DecisionTree]
    params: TreeParams
    n_features: int
    task: str

    def _mean_over_trees(self, X: np.ndarray) -> np.ndarray:
        X = check_matrix(X)
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        acc = np.zeros(X.shape[0])
        for tree in self.trees:
            acc += tree.predict(X)
        return acc / len(self.trees)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self._mean_over_trees(X)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if self.task != "classification":
            raise ValueError("predict_proba requires a classification forest")
        return self._mean_over_trees(X)


def fit_random_forest(
    X: np.ndarray,
    y: np.ndarray,
    params: TreeParams = TreeParams(),
    task: str = "classification",
    bootstrap: bool = True,
) -> RandomForestModel:
    """Bagged trees with per-split feature subsampling.

    Default subsample width is sqrt(d) for classification and ceil(d/3) for
    regression; probabilities are means of per-tree leaf frequencies.
    """
    _check_task(task)
    X = check_matrix(X)
    y = check_target(y, X.shape[0], binary=task == "classification")
    n, d = X.shape
    criterion = 1 if task == "classification" else 0
    default_mode = "sqrt" if task == "classification" else "third"
    width = _subsample_width(params.feature_subsample, default_mode, d)
    rng = derive_rng(params.seed, "forest")

    trees = []
    for _ in range(params.n_trees):
        rows = rng.integers(0, n, n) if bootstrap else np.arange(n)
        Xb = np.ascontiguousarray(X[rows])
        yb = y[rows]
        subsets = None
        if width is not None:
            subsets = _draw_subsets(rng, d, width, n, params.max_depth)
        trees.append(_grow(Xb, yb, None, params, criterion, subsets, task, "mean"))
    return RandomForestModel(trees=trees, params=params, n_features=d, task=task)


@dataclass(frozen=True)
class GradientBoostedModel:
    trees: list[DecisionTree]
    params: TreeParams
    base_score: float
    n_features: int
    task: str
    train_losses: list[float] = field(default_factory=list)
    degenerate: bool = False
    constant: float | None = None

    def _raw_score(self, X: np.ndarray) -> np.ndarray:
        X = check_matrix(X)
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        score = np.full(X.shape[0], self.base_score)
        for tree in self.trees:
            score += self.params.learning_rate * tree.predict(X)
        return score

    def predict(self, X: np.ndarray) -> np.ndarray:
        if self.task != "regression":
            raise ValueError("predict requires a regression booster")
        return self._raw_score(X)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if self.task != "classification":
            raise ValueError("predict_proba requires a classification booster")
        if self.degenerate:
            X = np.asarray(X)
            return np.full(X.shape[0], self.constant)
        return np.clip(sigmoid(self._raw_score(X)), PROB_CLIP, 1.0 - PROB_CLIP)


def fit_gbm(
    X: np.ndarray,
    y: np.ndarray,
    params: TreeParams = TreeParams(),
    task: str = "classification",
) -> GradientBoostedModel:
    """Gradient boosting with depth-bounded regression trees on all features.

    Classification boosts the logistic loss from the base-rate log-odds with
    Newton leaf values; a single-class target short-circuits to a constant
    model clamped into [PROB_CLIP, 1 - PROB_CLIP] and flagged degenerate.
    Regression boosts squared error with mean-residual leaves. Training loss
    after every round is recorded in train_losses.
    """
    _check_task(task)
    X = check_matrix(X)
    y = check_target(y, X.shape[0], binary=task == "classification")

    if task == "classification" and y.min() == y.max():
        rate = float(np.clip(y.mean(), PROB_CLIP, 1.0 - PROB_CLIP))
        return GradientBoostedModel(
            trees=[],
            params=params,
            base_score=0.0,
            n_features=X.shape[1],
            task=task,
            degenerate=True,
            constant=rate,
        )

    trees: list[DecisionTree] = []
    losses: list[float] = []
    if task == "classification":
        p_bar = float(y.mean())
        base = math.log(p_bar / (1.0 - p_bar))
        score = np.full(len(y), base)
        for _ in range(params.n_trees):
            p = sigmoid(score)
            resid = y - p
            hess = p * (1.0 - p)
            tree = _grow(X, resid, hess, params, 0, None, "regression", "newton")
            score = score + params.learning_rate * tree.predict(X)
            trees.append(tree)
            losses.append(log_loss(y, sigmoid(score)))
    else:
        base = float(y.mean())
        score = np.full(len(y), base)
        for _ in range(params.n_trees):
            resid = y - score
            tree = _grow(X, resid, None, params, 0, None, "regression", "mean")
            score = score + params.learning_rate * tree.predict(X)
            trees.append(tree)
            losses.append(float(np.mean((y - score) ** 2)))

    return GradientBoostedModel(
        trees=trees,
        params=params,
        base_score=base,
        n_features=X.shape[1],
        task=task,
        train_losses=losses,
    )
