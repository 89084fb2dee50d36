"""Pipeline pool, held-out error matrix, and per-sample dynamic weighting.

The flow is phase-ordered: fit_pool trains each imputer->classifier pipeline
on stage-1 rows; build_error_matrix scores every pipeline on held-out stage-2
rows (entry = |target - predicted probability|) and caches each pipeline's
standardized imputed stage-2 matrix as its neighbor-search substrate; at
inference each pipeline imputes the query with its own imputer, finds its k
nearest stage-2 rows in its own standardized geometry, and converts the mean
neighborhood error into a competence. Softmax over competences gives the
per-sample weights (M-DEW); uniform weights give the mean baseline (UMA).
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset, ScalerStats, matrix_scaler
from .errors import ConfigError, DataError
from .imputers import (
    FittedImputer,
    ImputerSpec,
    _spec_from_dict,
    _spec_to_dict,
    fit_imputer,
    imputer_from_dict,
    imputer_to_dict,
    spec_from_name,
    spec_key,
)
from .learners import TreeParams, fit_gbm, fit_random_forest, model_from_dict, model_to_dict
from .mathutil import softmax
from .seeding import derive_seed

__all__ = [
    "PipelineSpec",
    "FittedPipeline",
    "ErrorMatrix",
    "WeightedPrediction",
    "default_pool",
    "pool_from_config",
    "fit_pool",
    "build_error_matrix",
    "mdew_predict",
    "uma_predict",
    "predict_batch",
    "save_context",
    "load_context",
]

_CLASSIFIERS = ("random_forest", "gbm")
_CLF_SHORT = {"random_forest": "rf", "gbm": "gbm"}
_BATCH_CHUNK = 256


@dataclass(frozen=True)
class PipelineSpec:
    """One imputer->classifier pipeline in the pool."""

    label: str
    imputer: ImputerSpec
    classifier: str
    params: TreeParams = TreeParams()

    def __post_init__(self):
        if self.classifier not in _CLASSIFIERS:
            raise ConfigError(
                f"unknown classifier {self.classifier!r}; choose from {_CLASSIFIERS}"
            )
        if not self.label:
            raise ConfigError("pipeline label must be non-empty")


@dataclass
class FittedPipeline:
    """Fitted pipeline; search_* fields are attached by build_error_matrix."""

    spec: PipelineSpec
    imputer: FittedImputer
    classifier: object
    search_scaler: ScalerStats | None = None
    search_matrix: np.ndarray | None = None


@dataclass(frozen=True)
class ErrorMatrix:
    """Held-out absolute errors, one row per stage-2 sample, one column per pipeline."""

    entries: np.ndarray
    row_ids: np.ndarray
    labels: list[str]

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=np.float64)
        if entries.ndim != 2:
            raise DataError("error matrix must be 2-D")
        if entries.shape != (len(self.row_ids), len(self.labels)):
            raise DataError(
                f"error matrix shape {entries.shape} does not match "
                f"{len(self.row_ids)} rows x {len(self.labels)} pipelines"
            )
        if entries.size and (entries.min() < 0.0 or entries.max() > 1.0):
            raise DataError("error matrix entries must lie in [0, 1]")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "row_ids", np.asarray(self.row_ids))
        object.__setattr__(self, "labels", list(self.labels))


@dataclass(frozen=True)
class WeightedPrediction:
    """Combined probability with its weights and per-pipeline evidence."""

    probability: float
    weights: np.ndarray
    per_pipeline_probs: np.ndarray
    neighbor_ids: np.ndarray | None


_DEFAULT_IMPUTERS = ("knn", "ridge-iter", "rf-iter", "gbm-iter")


def default_pool(params: TreeParams | None = None) -> list[PipelineSpec]:
    """Four imputers crossed with two tree-ensemble classifiers (8 pipelines)."""
    params = params or TreeParams()
    pool = []
    for imp_name in _DEFAULT_IMPUTERS:
        for clf in _CLASSIFIERS:
            pool.append(
                PipelineSpec(
                    label=f"{imp_name}+{_CLF_SHORT[clf]}",
                    imputer=spec_from_name(imp_name),
                    classifier=clf,
                    params=params,
                )
            )
    return pool


def pool_from_config(entries: list[dict]) -> list[PipelineSpec]:
    """Build a pool from config dicts: {imputer, classifier, label?, params?}."""
    pool = []
    for entry in entries:
        if "imputer" not in entry or "classifier" not in entry:
            raise ConfigError(f"pool entry needs 'imputer' and 'classifier': {entry}")
        imputer = entry["imputer"]
        spec = spec_from_name(imputer) if isinstance(imputer, str) else _spec_from_dict(imputer)
        clf = entry["classifier"]
        clf = {"rf": "random_forest"}.get(clf, clf)
        params = TreeParams(**entry.get("params", {}))
        label = entry.get("label")
        if label is None:
            imp_name = imputer if isinstance(imputer, str) else spec.kind
            label = f"{imp_name}+{_CLF_SHORT.get(clf, clf)}"
        pool.append(PipelineSpec(label=label, imputer=spec, classifier=clf, params=params))
    return pool


def fit_pool(specs: list[PipelineSpec], stage1: Dataset, seed: int = 0) -> list[FittedPipeline]:
    """Fit every pipeline on stage-1 rows.

    Pipelines sharing an identical (imputer spec, derived seed) share one
    fitted imputer; per-pipeline classifier seeds derive from the pool seed,
    the label, and the spec's own seed, so reruns are reproducible and specs
    differing only in seed stay distinct.
    """
    if not specs:
        raise ConfigError("pipeline pool is empty")
    labels = [s.label for s in specs]
    if len(set(labels)) != len(labels):
        dupes = sorted({l for l in labels if labels.count(l) > 1})
        raise ConfigError(f"duplicate pipeline labels {dupes}")
    if len(np.unique(stage1.target)) < 2:
        raise DataError("stage-1 data contains a single class")

    imputer_cache: dict[tuple, tuple[FittedImputer, np.ndarray]] = {}
    y1 = stage1.target.astype(np.float64)
    pipelines = []
    for spec in specs:
        ikey = spec_key(spec.imputer, 0)
        if ikey not in imputer_cache:
            iseed = derive_seed(seed, "imputer", repr(ikey))
            fitted_imp = fit_imputer(spec.imputer, stage1, iseed)
            imputer_cache[ikey] = (fitted_imp, fitted_imp.transform(stage1))
        fitted_imp, X1 = imputer_cache[ikey]
        clf_params = replace(
            spec.params, seed=derive_seed(seed, "classifier", spec.label, spec.params.seed)
        )
        if spec.classifier == "random_forest":
            clf = fit_random_forest(X1, y1, clf_params, task="classification")
        else:
            clf = fit_gbm(X1, y1, clf_params, task="classification")
        pipelines.append(FittedPipeline(spec=spec, imputer=fitted_imp, classifier=clf))
    return pipelines


def build_error_matrix(pipelines: list[FittedPipeline], stage2: Dataset) -> ErrorMatrix:
    """Score each pipeline on stage-2 rows and cache its search substrate.

    Entry (i, j) is |y_i - p_j(x_i)|. As a side effect each pipeline stores
    its imputed stage-2 matrix, standardized by that matrix's own statistics,
    for later nearest-neighbor competence lookups.
    """
    if not pipelines:
        raise ConfigError("no pipelines to score")
    if stage2.n_rows == 0:
        raise DataError("stage-2 split is empty")
    y2 = stage2.target.astype(np.float64)
    entries = np.empty((stage2.n_rows, len(pipelines)))
    for j, pl in enumerate(pipelines):
        imputed = pl.imputer.transform(stage2)
        scaler = matrix_scaler(imputed)
        pl.search_scaler = scaler
        pl.search_matrix = (imputed - scaler.means) / scaler.stds
        probs = pl.classifier.predict_proba(imputed)
        entries[:, j] = np.abs(y2 - probs)
    return ErrorMatrix(
        entries=entries,
        row_ids=stage2.row_ids.copy(),
        labels=[pl.spec.label for pl in pipelines],
    )


def _check_ready(pipelines: list[FittedPipeline], em: ErrorMatrix, k: int) -> None:
    if [pl.spec.label for pl in pipelines] != list(em.labels):
        raise ConfigError("error-matrix labels do not match the pipeline pool")
    if not 1 <= k <= em.entries.shape[0]:
        raise ConfigError(
            f"k must be in [1, {em.entries.shape[0]}] (stage-2 rows), got {k}"
        )
    for pl in pipelines:
        if pl.search_matrix is None:
            raise DataError(
                f"pipeline {pl.spec.label!r} has no search substrate; "
                "run build_error_matrix first"
            )
        if pl.search_matrix.shape[0] != em.entries.shape[0]:
            raise DataError("search substrate rows do not match error-matrix rows")


def predict_batch(
    pipelines: list[FittedPipeline],
    em: ErrorMatrix,
    samples: Dataset,
    k: int = 5,
    method: str = "mdew",
) -> list[WeightedPrediction]:
    """Predict each sample with per-sample softmax weights ('mdew') or uniform ('uma')."""
    if method not in ("mdew", "uma"):
        raise ConfigError(f"method must be 'mdew' or 'uma', got {method!r}")
    _check_ready(pipelines, em, k)
    q = samples.n_rows
    p = len(pipelines)
    per_probs = np.empty((q, p))
    nbr_pos = np.empty((q, p, k), dtype=np.int64) if method == "mdew" else None

    for j, pl in enumerate(pipelines):
        imputed = pl.imputer.transform(samples)
        per_probs[:, j] = pl.classifier.predict_proba(imputed)
        if method != "mdew":
            continue
        Z = (imputed - pl.search_scaler.means) / pl.search_scaler.stds
        S = pl.search_matrix
        for start in range(0, q, _BATCH_CHUNK):
            chunk = Z[start : start + _BATCH_CHUNK]
            d2 = ((chunk[:, None, :] - S[None, :, :]) ** 2).sum(axis=2)
            nbr_pos[start : start + _BATCH_CHUNK, j] = np.argsort(
                d2, axis=1, kind="stable"
            )[:, :k]

    out = []
    for i in range(q):
        if method == "mdew":
            competences = np.empty(p)
            for j in range(p):
                competences[j] = 1.0 - float(np.mean(em.entries[nbr_pos[i, j], j]))
            weights = softmax(competences)
            neighbor_ids = em.row_ids[nbr_pos[i]]
        else:
            weights = np.full(p, 1.0 / p)
            neighbor_ids = None
        probability = float(np.sum(weights * per_probs[i]))
        out.append(
            WeightedPrediction(
                probability=probability,
                weights=weights,
                per_pipeline_probs=per_probs[i].copy(),
                neighbor_ids=neighbor_ids,
            )
        )
    return out


def _single_sample_dataset(
    pipelines: list[FittedPipeline], values: np.ndarray, mask: np.ndarray | None
) -> Dataset:
    values = np.asarray(values, dtype=np.float64).reshape(1, -1)
    if mask is None:
        mask = np.isnan(values)
    else:
        mask = np.asarray(mask, dtype=bool).reshape(1, -1)
    d = pipelines[0].imputer.n_features
    if values.shape[1] != d:
        raise DataError(f"expected {d} features, got {values.shape[1]}")
    values = np.where(mask, np.nan, values)
    names = [f"x{j}" for j in range(d)]
    return Dataset(values, mask, np.zeros(1, dtype=np.int64), names, np.zeros(1, dtype=np.int64))


def mdew_predict(
    pipelines: list[FittedPipeline],
    em: ErrorMatrix,
    values: np.ndarray,
    mask: np.ndarray | None = None,
    k: int = 5,
) -> WeightedPrediction:
    """Dynamically weighted prediction for one sample (batch of one)."""
    data = _single_sample_dataset(pipelines, values, mask)
    return predict_batch(pipelines, em, data, k=k, method="mdew")[0]


def uma_predict(
    pipelines: list[FittedPipeline],
    em: ErrorMatrix,
    values: np.ndarray,
    mask: np.ndarray | None = None,
) -> WeightedPrediction:
    """Uniform-average prediction for one sample."""
    data = _single_sample_dataset(pipelines, values, mask)
    return predict_batch(pipelines, em, data, k=1, method="uma")[0]


def _pipeline_to_dict(pl: FittedPipeline) -> dict:
    return {
        "spec": {
            "label": pl.spec.label,
            "imputer": _spec_to_dict(pl.spec.imputer),
            "classifier": pl.spec.classifier,
            "params": {
                "max_depth": pl.spec.params.max_depth,
                "n_trees": pl.spec.params.n_trees,
                "learning_rate": pl.spec.params.learning_rate,
                "min_samples_leaf": pl.spec.params.min_samples_leaf,
                "feature_subsample": pl.spec.params.feature_subsample,
                "seed": pl.spec.params.seed,
            },
        },
        "imputer": imputer_to_dict(pl.imputer),
        "classifier": model_to_dict(pl.classifier),
        "search_scaler": None
        if pl.search_scaler is None
        else {
            "means": pl.search_scaler.means.tolist(),
            "stds": pl.search_scaler.stds.tolist(),
        },
        "search_matrix": None if pl.search_matrix is None else pl.search_matrix.tolist(),
    }


def _pipeline_from_dict(d: dict) -> FittedPipeline:
    s = d["spec"]
    spec = PipelineSpec(
        label=s["label"],
        imputer=_spec_from_dict(s["imputer"]),
        classifier=s["classifier"],
        params=TreeParams(**s["params"]),
    )
    scaler = None
    if d["search_scaler"] is not None:
        scaler = ScalerStats(
            means=np.asarray(d["search_scaler"]["means"], dtype=np.float64),
            stds=np.asarray(d["search_scaler"]["stds"], dtype=np.float64),
        )
    matrix = None if d["search_matrix"] is None else np.asarray(d["search_matrix"])
    return FittedPipeline(
        spec=spec,
        imputer=imputer_from_dict(d["imputer"]),
        classifier=model_from_dict(d["classifier"]),
        search_scaler=scaler,
        search_matrix=matrix,
    )


def save_context(directory: str, pipelines: list[FittedPipeline], em: ErrorMatrix) -> None:
    """Persist a fitted prediction context: pipelines JSON plus error-matrix CSV."""
    os.makedirs(directory, exist_ok=True)
    payload = {
        "format": "mdew-context",
        "version": 1,
        "pipelines": [_pipeline_to_dict(pl) for pl in pipelines],
    }
    with open(os.path.join(directory, "pipelines.json"), "w") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(directory, "error_matrix.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row_id"] + list(em.labels))
        for i in range(em.entries.shape[0]):
            writer.writerow(
                [int(em.row_ids[i])] + [repr(float(v)) for v in em.entries[i]]
            )


def load_context(directory: str) -> tuple[list[FittedPipeline], ErrorMatrix]:
    """Load a context written by save_context."""
    pipelines_path = os.path.join(directory, "pipelines.json")
    matrix_path = os.path.join(directory, "error_matrix.csv")
    try:
        with open(pipelines_path) as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot open {pipelines_path}: {exc}") from exc
    if payload.get("format") != "mdew-context" or payload.get("version") != 1:
        raise DataError(f"{pipelines_path}: not a prediction context")
    pipelines = [_pipeline_from_dict(d) for d in payload["pipelines"]]

    try:
        with open(matrix_path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = list(reader)
    except (OSError, StopIteration) as exc:
        raise DataError(f"cannot read {matrix_path}: {exc}") from exc
    labels = header[1:]
    row_ids = np.asarray([int(r[0]) for r in rows], dtype=np.int64)
    entries = np.asarray([[float(v) for v in r[1:]] for r in rows], dtype=np.float64)
    em = ErrorMatrix(entries=entries, row_ids=row_ids, labels=labels)
    if labels != [pl.spec.label for pl in pipelines]:
        raise DataError("error-matrix labels do not match pipelines.json")
    return pipelines, em
