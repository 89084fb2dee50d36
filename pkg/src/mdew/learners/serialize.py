"""Versioned JSON-dict serialization for every learner.

Round trip: model_from_dict(model_to_dict(m)) reproduces predictions exactly
(arrays are stored losslessly via float64 round-trippable repr in JSON).
"""

from __future__ import annotations

import numpy as np

from ..errors import DataError
from .knn import KnnRegressor
from .ridge import BayesianRidgeModel
from .trees import (
    ConstantModel,
    DecisionTree,
    GradientBoostedModel,
    RandomForestModel,
    TreeParams,
)

__all__ = ["model_to_dict", "model_from_dict", "MODEL_FORMAT", "MODEL_VERSION"]

MODEL_FORMAT = "mdew-model"
MODEL_VERSION = 1


def _params_to_dict(p: TreeParams) -> dict:
    return {
        "max_depth": p.max_depth,
        "n_trees": p.n_trees,
        "learning_rate": p.learning_rate,
        "min_samples_leaf": p.min_samples_leaf,
        "feature_subsample": p.feature_subsample,
        "seed": p.seed,
    }


def _tree_payload(t: DecisionTree) -> dict:
    return {
        "feature": t.feature.tolist(),
        "threshold": t.threshold.tolist(),
        "left": t.left.tolist(),
        "right": t.right.tolist(),
        "value": t.value.tolist(),
        "count": t.count.tolist(),
        "n_features": t.n_features,
        "task": t.task,
    }


def _tree_from_payload(d: dict) -> DecisionTree:
    return DecisionTree(
        feature=np.asarray(d["feature"], dtype=np.int32),
        threshold=np.asarray(d["threshold"], dtype=np.float64),
        left=np.asarray(d["left"], dtype=np.int32),
        right=np.asarray(d["right"], dtype=np.int32),
        value=np.asarray(d["value"], dtype=np.float64),
        count=np.asarray(d["count"], dtype=np.int64),
        n_features=int(d["n_features"]),
        task=d["task"],
    )


def model_to_dict(model) -> dict:
    head = {"format": MODEL_FORMAT, "version": MODEL_VERSION}
    if isinstance(model, ConstantModel):
        return head | {
            "kind": "constant",
            "probability": model.probability,
            "n_features": model.n_features,
            "degenerate": model.degenerate,
        }
    if isinstance(model, BayesianRidgeModel):
        return head | {
            "kind": "bayes_ridge",
            "coef": model.coef.tolist(),
            "intercept": model.intercept,
            "noise_precision": model.noise_precision,
            "weight_precision": model.weight_precision,
            "n_iter": model.n_iter,
            "converged": model.converged,
        }
    if isinstance(model, KnnRegressor):
        return head | {
            "kind": "knn_regressor",
            "X_train": model.X_train.tolist(),
            "y_train": model.y_train.tolist(),
            "k": model.k,
        }
    if isinstance(model, DecisionTree):
        return head | {"kind": "decision_tree", "tree": _tree_payload(model)}
    if isinstance(model, RandomForestModel):
        return head | {
            "kind": "random_forest",
            "params": _params_to_dict(model.params),
            "n_features": model.n_features,
            "task": model.task,
            "trees": [_tree_payload(t) for t in model.trees],
        }
    if isinstance(model, GradientBoostedModel):
        return head | {
            "kind": "gradient_boosted",
            "params": _params_to_dict(model.params),
            "base_score": model.base_score,
            "n_features": model.n_features,
            "task": model.task,
            "train_losses": list(model.train_losses),
            "degenerate": model.degenerate,
            "constant": model.constant,
            "trees": [_tree_payload(t) for t in model.trees],
        }
    raise DataError(f"cannot serialize model of type {type(model).__name__}")


def model_from_dict(d: dict):
    if d.get("format") != MODEL_FORMAT:
        raise DataError(f"not a serialized model: format={d.get('format')!r}")
    if d.get("version") != MODEL_VERSION:
        raise DataError(f"unsupported model version {d.get('version')!r}")
    kind = d.get("kind")
    if kind == "constant":
        return ConstantModel(
            probability=float(d["probability"]),
            n_features=int(d["n_features"]),
            degenerate=bool(d["degenerate"]),
        )
    if kind == "bayes_ridge":
        return BayesianRidgeModel(
            coef=np.asarray(d["coef"], dtype=np.float64),
            intercept=float(d["intercept"]),
            noise_precision=float(d["noise_precision"]),
            weight_precision=float(d["weight_precision"]),
            n_iter=int(d["n_iter"]),
            converged=bool(d["converged"]),
        )
    if kind == "knn_regressor":
        return KnnRegressor(
            X_train=np.asarray(d["X_train"], dtype=np.float64),
            y_train=np.asarray(d["y_train"], dtype=np.float64),
            k=int(d["k"]),
        )
    if kind == "decision_tree":
        return _tree_from_payload(d["tree"])
    if kind == "random_forest":
        return RandomForestModel(
            trees=[_tree_from_payload(t) for t in d["trees"]],
            params=TreeParams(**d["params"]),
            n_features=int(d["n_features"]),
            task=d["task"],
        )
    if kind == "gradient_boosted":
        return GradientBoostedModel(
            trees=[_tree_from_payload(t) for t in d["trees"]],
            params=TreeParams(**d["params"]),
            base_score=float(d["base_score"]),
            n_features=int(d["n_features"]),
            task=d["task"],
            train_losses=[float(x) for x in d["train_losses"]],
            degenerate=bool(d["degenerate"]),
            constant=None if d["constant"] is None else float(d["constant"]),
        )
    raise DataError(f"unknown model kind {kind!r}")
