"""Imputers: column mean, nan-aware KNN, and chained-equation iterative.

All imputers fit on training data only and can then transform any split with
the same fitted state. The iterative imputer initializes missing cells to
column means and sweeps columns in ascending-missing-count order, refitting a
backbone regressor per column on rows where that column is observed; sweeps
stop when the largest imputed-cell change, scaled by the column's observed
std, drops below the tolerance, or after max_rounds. Transform replays the
sweep schedule with the final per-column regressors.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset, ScalerStats, _column_stats
from .errors import ConfigError, DataError
from .learners import (
    TreeParams,
    fit_bayes_ridge,
    fit_gbm,
    fit_knn_regressor,
    fit_random_forest,
    model_from_dict,
    model_to_dict,
)
from .seeding import derive_seed

__all__ = [
    "ImputerSpec",
    "FittedImputer",
    "spec_from_name",
    "spec_key",
    "fit_imputer",
    "impute_dataset",
    "nan_euclidean_distances",
    "imputer_to_dict",
    "imputer_from_dict",
    "IMPUTER_NAMES",
]

_KINDS = ("mean", "knn", "iterative")
_BACKBONES = ("bayes_ridge", "knn", "forest", "boosted")


@dataclass(frozen=True)
class ImputerSpec:
    """Declarative description of an imputer."""

    kind: str
    backbone: str | None = None
    k: int = 5
    max_rounds: int = 10
    tolerance: float = 1e-3
    backbone_params: TreeParams | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown imputer kind {self.kind!r}")
        if self.kind == "iterative":
            if self.backbone not in _BACKBONES:
                raise ConfigError(f"iterative imputer needs a backbone, got {self.backbone!r}")
        elif self.backbone is not None:
            raise ConfigError(f"{self.kind} imputer takes no backbone")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.max_rounds < 0:
            raise ConfigError(f"max_rounds must be >= 0, got {self.max_rounds}")
        if self.tolerance <= 0:
            raise ConfigError(f"tolerance must be positive, got {self.tolerance}")


IMPUTER_NAMES = {
    "mean": ImputerSpec(kind="mean"),
    "knn": ImputerSpec(kind="knn"),
    "ridge-iter": ImputerSpec(kind="iterative", backbone="bayes_ridge"),
    "knn-iter": ImputerSpec(kind="iterative", backbone="knn"),
    "rf-iter": ImputerSpec(kind="iterative", backbone="forest"),
    "gbm-iter": ImputerSpec(kind="iterative", backbone="boosted"),
}


def spec_from_name(name: str) -> ImputerSpec:
    try:
        return IMPUTER_NAMES[name]
    except KeyError:
        raise ConfigError(
            f"unknown imputer {name!r}; choose from {sorted(IMPUTER_NAMES)}"
        ) from None


def spec_key(spec: ImputerSpec, seed: int) -> tuple:
    """Hashable identity of a fit; equal keys yield identical fitted states."""
    params = spec.backbone_params
    params_key = None
    if params is not None:
        params_key = (
            params.max_depth,
            params.n_trees,
            params.learning_rate,
            params.min_samples_leaf,
            params.feature_subsample,
            params.seed,
        )
    return (spec.kind, spec.backbone, spec.k, spec.max_rounds, spec.tolerance, params_key, seed)


def nan_euclidean_distances(
    A: np.ndarray,
    A_mask: np.ndarray,
    B: np.ndarray,
    B_mask: np.ndarray,
) -> np.ndarray:
    """Pairwise Euclidean distance over mutually observed coordinates.

    The squared distance over the overlap is rescaled by d / n_overlap before
    the square root; pairs with no overlap get +inf.
    """
    d = A.shape[1]
    Ao = (~A_mask).astype(np.float64)
    Bo = (~B_mask).astype(np.float64)
    Av = np.where(A_mask, 0.0, A)
    Bv = np.where(B_mask, 0.0, B)
    overlap = Ao @ Bo.T
    sq = (Av**2) @ Bo.T - 2.0 * (Av @ Bv.T) + Ao @ (Bv**2).T
    np.clip(sq, 0.0, None, out=sq)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = np.where(overlap > 0, d * sq / overlap, np.inf)
    return np.sqrt(scaled)


@dataclass(frozen=True)
class FittedImputer:
    """Fitted imputation state; transform yields complete matrices."""

    spec: ImputerSpec
    n_features: int
    column_means: np.ndarray
    scaler_stats: ScalerStats
    sweep_order: list[int] = field(default_factory=list)
    regressors: dict = field(default_factory=dict)
    reference_values: np.ndarray | None = None
    reference_mask: np.ndarray | None = None

    def transform(self, data: Dataset) -> np.ndarray:
        return self.transform_masked(data.values, data.mask)

    def transform_masked(self, values: np.ndarray, mask: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        mask = np.asarray(mask, dtype=bool)
        if values.ndim != 2 or values.shape[1] != self.n_features:
            raise DataError(
                f"expected shape (*, {self.n_features}), got {values.shape}"
            )
        if self.spec.kind == "mean":
            out = self._fill_means(values, mask)
        elif self.spec.kind == "knn":
            out = self._transform_knn(values, mask)
        else:
            out = self._transform_iterative(values, mask)
        if not np.isfinite(out).all():
            raise DataError("imputation produced non-finite values")
        return out

    def _fill_means(self, values: np.ndarray, mask: np.ndarray) -> np.ndarray:
        return np.where(mask, self.column_means, values)

    def _transform_knn(self, values: np.ndarray, mask: np.ndarray) -> np.ndarray:
        out = np.where(mask, np.nan, values)
        need = np.flatnonzero(mask.any(axis=1))
        if len(need) == 0:
            return out
        dist = nan_euclidean_distances(
            values[need], mask[need], self.reference_values, self.reference_mask
        )
        observed_ref = ~self.reference_mask
        k = self.spec.k
        for row_pos, i in enumerate(need):
            order = np.argsort(dist[row_pos], kind="stable")
            usable = order[np.isfinite(dist[row_pos][order])]
            for c in np.flatnonzero(mask[i]):
                donors = usable[observed_ref[usable, c]][:k]
                if len(donors) == 0:
                    out[i, c] = self.column_means[c]
                else:
                    out[i, c] = float(np.mean(self.reference_values[donors, c]))
        return out

    def _transform_iterative(self, values: np.ndarray, mask: np.ndarray) -> np.ndarray:
        out = self._fill_means(values, mask)
        if not self.regressors:
            return out
        keep = np.ones(self.n_features, dtype=bool)
        stds = self.scaler_stats.stds
        for _ in range(self.spec.max_rounds):
            worst = 0.0
            for c in self.sweep_order:
                rows = mask[:, c]
                if not rows.any():
                    continue
                keep[c] = False
                pred = self.regressors[c].predict(out[np.ix_(rows, keep)])
                keep[c] = True
                change = float(np.max(np.abs(pred - out[rows, c]))) / stds[c]
                out[rows, c] = pred
                worst = max(worst, change)
            if worst < self.spec.tolerance:
                break
        return out


def _fit_backbone(spec: ImputerSpec, X: np.ndarray, y: np.ndarray, col_seed: int):
    if spec.backbone == "bayes_ridge":
        return fit_bayes_ridge(X, y)
    if spec.backbone == "knn":
        return fit_knn_regressor(X, y, k=spec.k)
    params = spec.backbone_params or TreeParams()
    params = replace(params, seed=derive_seed(col_seed, "backbone", params.seed))
    if spec.backbone == "forest":
        return fit_random_forest(X, y, params, task="regression")
    return fit_gbm(X, y, params, task="regression")


def fit_imputer(spec: ImputerSpec, data: Dataset, seed: int = 0) -> FittedImputer:
    """Fit the spec on training data; deterministic for a given (spec, seed)."""
    means, stds = _column_stats(data.values, data.mask)
    stats = ScalerStats(means=means, stds=stds)
    base = dict(
        spec=spec,
        n_features=data.n_features,
        column_means=means,
        scaler_stats=stats,
    )
    if spec.kind == "mean":
        return FittedImputer(**base)
    if spec.kind == "knn":
        return FittedImputer(
            **base,
            reference_values=data.values.copy(),
            reference_mask=data.mask.copy(),
        )

    mask = data.mask
    missing_counts = mask.sum(axis=0)
    order = [int(c) for c in np.lexsort((np.arange(data.n_features), missing_counts))
             if missing_counts[c] > 0]
    fitted = FittedImputer(**base, sweep_order=order)
    if not order or data.n_features < 2 or spec.max_rounds == 0:
        return fitted

    work = np.where(mask, means, data.values)
    keep = np.ones(data.n_features, dtype=bool)
    regressors: dict[int, object] = {}
    for _ in range(spec.max_rounds):
        worst = 0.0
        for c in order:
            obs = ~mask[:, c]
            rows = mask[:, c]
            keep[c] = False
            model = _fit_backbone(
                spec,
                work[np.ix_(obs, keep)],
                data.values[obs, c],
                derive_seed(seed, "imputer-column", c),
            )
            regressors[c] = model
            if rows.any():
                pred = model.predict(work[np.ix_(rows, keep)])
                change = float(np.max(np.abs(pred - work[rows, c]))) / stds[c]
                work[rows, c] = pred
                worst = max(worst, change)
            keep[c] = True
        if worst < spec.tolerance:
            break
    return FittedImputer(**base, sweep_order=order, regressors=regressors)


def impute_dataset(
    spec: ImputerSpec,
    train: Dataset,
    others: list[Dataset] | None = None,
    seed: int = 0,
) -> tuple[FittedImputer, list[np.ndarray]]:
    """Fit on train only, then transform train and each other split."""
    fitted = fit_imputer(spec, train, seed)
    outputs = [fitted.transform(train)]
    for other in others or []:
        outputs.append(fitted.transform(other))
    return fitted, outputs


def _spec_to_dict(spec: ImputerSpec) -> dict:
    params = spec.backbone_params
    return {
        "kind": spec.kind,
        "backbone": spec.backbone,
        "k": spec.k,
        "max_rounds": spec.max_rounds,
        "tolerance": spec.tolerance,
        "backbone_params": None
        if params is None
        else {
            "max_depth": params.max_depth,
            "n_trees": params.n_trees,
            "learning_rate": params.learning_rate,
            "min_samples_leaf": params.min_samples_leaf,
            "feature_subsample": params.feature_subsample,
            "seed": params.seed,
        },
    }


def _spec_from_dict(d: dict) -> ImputerSpec:
    params = d.get("backbone_params")
    return ImputerSpec(
        kind=d["kind"],
        backbone=d.get("backbone"),
        k=int(d.get("k", 5)),
        max_rounds=int(d.get("max_rounds", 10)),
        tolerance=float(d.get("tolerance", 1e-3)),
        backbone_params=None if params is None else TreeParams(**params),
    )


def imputer_to_dict(imp: FittedImputer) -> dict:
    return {
        "format": "mdew-imputer",
        "version": 1,
        "spec": _spec_to_dict(imp.spec),
        "n_features": imp.n_features,
        "column_means": imp.column_means.tolist(),
        "scaler_means": imp.scaler_stats.means.tolist(),
        "scaler_stds": imp.scaler_stats.stds.tolist(),
        "sweep_order": list(imp.sweep_order),
        "regressors": {str(c): model_to_dict(m) for c, m in imp.regressors.items()},
        "reference_values": None
        if imp.reference_values is None
        else np.where(imp.reference_mask, None, imp.reference_values).tolist(),
    }


def imputer_from_dict(d: dict) -> FittedImputer:
    if d.get("format") != "mdew-imputer" or d.get("version") != 1:
        raise DataError("not a serialized imputer")
    reference_values = None
    reference_mask = None
    if d["reference_values"] is not None:
        ref = np.asarray(
            [[np.nan if v is None else float(v) for v in row] for row in d["reference_values"]]
        )
        reference_values = ref
        reference_mask = np.isnan(ref)
    return FittedImputer(
        spec=_spec_from_dict(d["spec"]),
        n_features=int(d["n_features"]),
        column_means=np.asarray(d["column_means"], dtype=np.float64),
        scaler_stats=ScalerStats(
            means=np.asarray(d["scaler_means"], dtype=np.float64),
            stds=np.asarray(d["scaler_stds"], dtype=np.float64),
        ),
        sweep_order=[int(c) for c in d["sweep_order"]],
        regressors={int(c): model_from_dict(m) for c, m in d["regressors"].items()},
        reference_values=reference_values,
        reference_mask=reference_mask,
    )
