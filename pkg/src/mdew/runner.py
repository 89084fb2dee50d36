"""Experiment orchestration: config parsing, the cross-validated protocol,
deterministic report emission, and multi-experiment grids.

One experiment = load CSV -> optional amputation (mask drawn once on the full
dataset before folding) -> stratified k-fold; per fold the training share is
split into stage-1 (pipeline fitting) and stage-2 (error matrix), and the test
fold is predicted with the dynamically weighted ensemble, the uniform-average
baseline, and every base pipeline. Metrics are pooled over the concatenated
test folds. Reports are byte-stable for a fixed config+seed; wall-clock time
goes to a separate timing.json sidecar so report files stay deterministic.
"""

from __future__ import annotations

import csv
import json
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, load_csv, stratified_kfold, take, two_stage_split
from .ensemble import (
    PipelineSpec,
    build_error_matrix,
    default_pool,
    fit_pool,
    pool_from_config,
    predict_batch,
)
from .errors import ConfigError, DataError
from .metrics import (
    RankTable,
    ScoredSet,
    auroc,
    average_precision,
    brier,
    fraction_improved,
    paired_t_test_less,
    per_sample_errors,
    rank_experiments,
)
from .missingness import ampute
from .seeding import derive_seed

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "run_experiment",
    "run_grid",
    "emit_report",
    "load_config",
    "load_grid_config",
]

_MECHANISMS = ("none", "mcar", "mar", "mnar")
_DEFAULT_MISSING_TOKENS = ("", "NA", "NaN", "?")


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved description of one experiment."""

    dataset_path: str
    target_column: str = "target"
    missing_tokens: tuple = _DEFAULT_MISSING_TOKENS
    mechanism: str = "none"
    rate: float = 0.3
    column_fraction: float = 0.3
    cause_fraction: float = 3.0 / 7.0
    pool: object = "default"
    k_neighbors: int = 5
    folds: int = 5
    stage2_fraction: float = 0.2
    seed: int = 0
    output_dir: str = "."
    per_fold_amputation: bool = False
    name: str = ""

    def __post_init__(self):
        if not self.dataset_path:
            raise ConfigError("dataset_path must be non-empty")
        if self.mechanism not in _MECHANISMS:
            raise ConfigError(
                f"mechanism must be one of {_MECHANISMS}, got {self.mechanism!r}"
            )
        if self.mechanism != "none" and not 0.0 < self.rate < 1.0:
            raise ConfigError(f"rate must be in (0, 1), got {self.rate}")
        if not 0.0 < self.stage2_fraction < 1.0:
            raise ConfigError(f"stage2_fraction must be in (0, 1), got {self.stage2_fraction}")
        if self.folds < 2:
            raise ConfigError(f"folds must be >= 2, got {self.folds}")
        if self.k_neighbors < 1:
            raise ConfigError(f"k_neighbors must be >= 1, got {self.k_neighbors}")
        if self.pool != "default" and not self.pool:
            raise ConfigError("pipeline pool is empty")
        if not self.name:
            base = os.path.splitext(os.path.basename(self.dataset_path))[0]
            object.__setattr__(self, "name", f"{base}-{self.mechanism}")
        object.__setattr__(self, "missing_tokens", tuple(self.missing_tokens))

    def pool_specs(self) -> list[PipelineSpec]:
        if self.pool == "default":
            return default_pool()
        return pool_from_config(list(self.pool))

    def to_dict(self) -> dict:
        # output_dir is deliberately not echoed: report bytes must not depend
        # on where the report is written.
        return {
            "dataset_path": self.dataset_path,
            "target_column": self.target_column,
            "missing_tokens": list(self.missing_tokens),
            "mechanism": self.mechanism,
            "rate": self.rate,
            "column_fraction": self.column_fraction,
            "cause_fraction": self.cause_fraction,
            "pool": self.pool if self.pool == "default" else list(self.pool),
            "k_neighbors": self.k_neighbors,
            "folds": self.folds,
            "stage2_fraction": self.stage2_fraction,
            "seed": self.seed,
            "per_fold_amputation": self.per_fold_amputation,
            "name": self.name,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "dataset_path" not in d:
            raise ConfigError("config needs 'dataset_path'")
        return cls(**d)


def load_config(path: str) -> ExperimentConfig:
    """Read a single-experiment JSON config file."""
    try:
        with open(path) as fh:
            d = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot open config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(d, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    return ExperimentConfig.from_dict(d)


def load_grid_config(path: str) -> list[ExperimentConfig]:
    """Read a grid config: {'defaults': {...}, 'experiments': [{...}, ...]}."""
    try:
        with open(path) as fh:
            d = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot open config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(d, dict) or "experiments" not in d:
        raise ConfigError(f"grid config {path} needs an 'experiments' list")
    defaults = d.get("defaults", {})
    configs = []
    for entry in d["experiments"]:
        merged = {**defaults, **entry}
        configs.append(ExperimentConfig.from_dict(merged))
    names = [c.name for c in configs]
    if len(set(names)) != len(names):
        raise ConfigError("experiment names in a grid must be unique; set 'name' fields")
    return configs


@dataclass(frozen=True)
class ExperimentReport:
    """Self-contained experiment outcome; re-runnable from its config echo."""

    name: str
    config: dict
    seed: int
    n_rows: int
    n_features: int
    method_labels: list[str]
    metrics: dict
    fraction_improved: float
    t_test: dict
    per_fold: list
    rank_row: dict
    stage2_sizes: list
    amputation_plan: dict | None
    fold_assignments: list
    fold_indices: list
    predictions: list = field(repr=False)

    def to_dict(self) -> dict:
        """JSON-ready form (predictions ship separately as CSV)."""
        return {
            "name": self.name,
            "config": self.config,
            "seed": self.seed,
            "n_rows": self.n_rows,
            "n_features": self.n_features,
            "method_labels": self.method_labels,
            "metrics": self.metrics,
            "fraction_improved": self.fraction_improved,
            "t_test": self.t_test,
            "per_fold": self.per_fold,
            "rank_row": self.rank_row,
            "stage2_sizes": self.stage2_sizes,
            "amputation_plan": self.amputation_plan,
        }


def _method_metrics(targets: np.ndarray, probs: np.ndarray, label: str) -> dict:
    s = ScoredSet(targets, probs, label)
    return {
        "auroc": auroc(s),
        "average_precision": average_precision(s),
        "brier": brier(s),
    }


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Run one cross-validated experiment; deterministic per config+seed."""
    specs = config.pool_specs()
    pipeline_labels = [s.label for s in specs]
    data = load_csv(
        config.dataset_path,
        target_column=config.target_column,
        missing_tokens=config.missing_tokens,
    )
    n = data.n_rows

    plan_dict: dict = {"mechanism": config.mechanism}
    working = data
    if config.mechanism != "none" and not config.per_fold_amputation:
        working, plan_dict = _ampute_once(config, data, derive_seed(config.seed, "ampute"))
        plan_dict["per_fold"] = False
    elif config.mechanism != "none":
        plan_dict["per_fold"] = True
        plan_dict["folds"] = []  # filled as each fold is re-amputed below

    plan = stratified_kfold(working, config.folds, derive_seed(config.seed, "folds"))

    all_rows: list[dict] = []
    per_fold = []
    stage2_sizes = []
    fold_indices = []
    for fold in range(config.folds):
        fold_data = working
        if config.mechanism != "none" and config.per_fold_amputation:
            fold_data, fold_plan = _ampute_once(
                config, data, derive_seed(config.seed, "ampute", fold)
            )
            plan_dict["folds"].append(fold_plan)
        test_rows = plan.test_rows(fold)
        train_rows = plan.train_rows(fold)
        s1_idx, s2_idx = two_stage_split(
            fold_data, train_rows, config.stage2_fraction, derive_seed(config.seed, "split", fold)
        )
        _assert_partition(n, s1_idx, s2_idx, test_rows)
        if config.folds == 5 and config.stage2_fraction == 0.2:
            # Under the default protocol the competence substrate must hold
            # 0.16*n rows (to within stratification rounding).
            assert abs(len(s2_idx) - 0.16 * n) <= 1.0, (
                f"stage-2 size {len(s2_idx)} deviates from 0.16*{n}"
            )
        stage1 = take(fold_data, s1_idx)
        stage2 = take(fold_data, s2_idx)
        pipelines = fit_pool(specs, stage1, seed=derive_seed(config.seed, "pool", fold))
        em = build_error_matrix(pipelines, stage2)
        # Exact storage contract: one error entry per (stage-2 row, pipeline).
        assert em.entries.shape == (len(s2_idx), len(specs))
        stage2_sizes.append(len(s2_idx))
        fold_indices.append(
            {
                "fold": fold,
                "stage1": [int(i) for i in s1_idx],
                "stage2": [int(i) for i in s2_idx],
                "test": [int(i) for i in test_rows],
            }
        )

        test_data = take(fold_data, test_rows)
        mdew_preds = predict_batch(pipelines, em, test_data, k=config.k_neighbors, method="mdew")
        uma_preds = predict_batch(pipelines, em, test_data, k=config.k_neighbors, method="uma")

        fold_rows = []
        for i in range(test_data.n_rows):
            mp, up = mdew_preds[i], uma_preds[i]
            fold_rows.append(
                {
                    "row_id": int(test_data.row_ids[i]),
                    "fold": fold,
                    "target": int(test_data.target[i]),
                    "uma_prob": up.probability,
                    "mdew_prob": mp.probability,
                    "pipeline_probs": [float(v) for v in mp.per_pipeline_probs],
                    "weights": [float(w) for w in mp.weights],
                }
            )
        all_rows.extend(fold_rows)
        per_fold.append(_fold_summary(fold, fold_rows, pipeline_labels))

    targets = np.array([r["target"] for r in all_rows], dtype=np.int64)
    mdew_probs = np.array([r["mdew_prob"] for r in all_rows])
    uma_probs = np.array([r["uma_prob"] for r in all_rows])
    pipe_probs = np.array([r["pipeline_probs"] for r in all_rows])

    metrics = {
        "mdew": _method_metrics(targets, mdew_probs, "mdew"),
        "uma": _method_metrics(targets, uma_probs, "uma"),
    }
    for j, label in enumerate(pipeline_labels):
        metrics[label] = _method_metrics(targets, pipe_probs[:, j], label)

    err_mdew = per_sample_errors(ScoredSet(targets, mdew_probs))
    err_uma = per_sample_errors(ScoredSet(targets, uma_probs))
    frac = fraction_improved(err_mdew, err_uma)
    t_res = paired_t_test_less(err_mdew, err_uma)

    rank = rank_experiments(
        [{m: metrics[m]["auroc"] for m in metrics}], [config.name]
    )
    rank_row = {label: float(rank.ranks[0][j]) for j, label in enumerate(rank.labels)}

    return ExperimentReport(
        name=config.name,
        config=config.to_dict(),
        seed=config.seed,
        n_rows=n,
        n_features=data.n_features,
        method_labels=["mdew", "uma"] + pipeline_labels,
        metrics=metrics,
        fraction_improved=frac,
        t_test=t_res.to_dict(),
        per_fold=per_fold,
        rank_row=rank_row,
        stage2_sizes=stage2_sizes,
        amputation_plan=plan_dict,
        fold_assignments=[int(a) for a in plan.assignments],
        fold_indices=fold_indices,
        predictions=all_rows,
    )


def _ampute_once(config: ExperimentConfig, data: Dataset, seed: int):
    kwargs = {}
    if config.mechanism in ("mar", "mnar"):
        kwargs = {
            "column_fraction": config.column_fraction,
            "cause_fraction": config.cause_fraction,
        }
    result = ampute(data, mechanism=config.mechanism, rate=config.rate, seed=seed, **kwargs)
    return result.data, result.plan.to_dict()


def _assert_partition(n, s1_idx, s2_idx, test_rows):
    """Leakage guard: stage-1, stage-2, test must partition the row indices."""
    s1, s2, te = set(map(int, s1_idx)), set(map(int, s2_idx)), set(map(int, test_rows))
    assert not (s1 & s2) and not (s1 & te) and not (s2 & te), "overlapping splits"
    assert len(s1) + len(s2) + len(te) == n, "splits do not cover the dataset"


def _fold_summary(fold: int, fold_rows: list[dict], pipeline_labels: list[str]) -> dict:
    targets = np.array([r["target"] for r in fold_rows], dtype=np.int64)
    mdew_probs = np.array([r["mdew_prob"] for r in fold_rows])
    uma_probs = np.array([r["uma_prob"] for r in fold_rows])
    pipe_probs = np.array([r["pipeline_probs"] for r in fold_rows])
    summary = {
        "fold": fold,
        "n_test": len(fold_rows),
        "metrics": {
            "mdew": _method_metrics(targets, mdew_probs, "mdew"),
            "uma": _method_metrics(targets, uma_probs, "uma"),
        },
        "fraction_improved": fraction_improved(
            np.abs(mdew_probs - targets), np.abs(uma_probs - targets)
        ),
    }
    for j, label in enumerate(pipeline_labels):
        summary["metrics"][label] = _method_metrics(targets, pipe_probs[:, j], label)
    return summary


def emit_report(report: ExperimentReport, out_dir: str, wall_clock_seconds: float | None = None) -> dict:
    """Write report.json, predictions.csv, metrics.csv, folds.json (all
    byte-stable for a fixed report) and, when given, a timing.json sidecar
    (excluded from the determinism contract). Returns {kind: path}."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {}

    report_path = os.path.join(out_dir, "report.json")
    with open(report_path, "w") as fh:
        json.dump(report.to_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    paths["report"] = report_path

    labels = report.method_labels[2:]
    pred_path = os.path.join(out_dir, "predictions.csv")
    with open(pred_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["row_id", "fold", "target", "uma_prob", "mdew_prob"]
            + [f"prob__{l}" for l in labels]
            + [f"weight__{l}" for l in labels]
        )
        for r in report.predictions:
            writer.writerow(
                [r["row_id"], r["fold"], r["target"], repr(r["uma_prob"]), repr(r["mdew_prob"])]
                + [repr(v) for v in r["pipeline_probs"]]
                + [repr(w) for w in r["weights"]]
            )
    paths["predictions"] = pred_path

    metrics_path = os.path.join(out_dir, "metrics.csv")
    with open(metrics_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "auroc", "average_precision", "brier", "rank"])
        for method in report.method_labels:
            m = report.metrics[method]
            writer.writerow(
                [
                    method,
                    repr(m["auroc"]),
                    repr(m["average_precision"]),
                    repr(m["brier"]),
                    repr(report.rank_row[method]),
                ]
            )
    paths["metrics"] = metrics_path

    folds_path = os.path.join(out_dir, "folds.json")
    with open(folds_path, "w") as fh:
        json.dump(
            {
                "n_folds": report.config["folds"],
                "seed": report.seed,
                "assignments": report.fold_assignments,
                "splits": report.fold_indices,
            },
            fh,
            sort_keys=True,
        )
        fh.write("\n")
    paths["folds"] = folds_path

    if wall_clock_seconds is not None:
        timing_path = os.path.join(out_dir, "timing.json")
        with open(timing_path, "w") as fh:
            json.dump({"wall_clock_seconds": wall_clock_seconds}, fh)
            fh.write("\n")
        paths["timing"] = timing_path
    return paths


def _run_one_grid_job(config: ExperimentConfig) -> ExperimentReport:
    import time

    start = time.perf_counter()
    report = run_experiment(config)
    emit_report(report, config.output_dir, wall_clock_seconds=time.perf_counter() - start)
    return report


def run_grid(
    configs: list[ExperimentConfig], jobs: int = 1
) -> tuple[list[ExperimentReport], RankTable | None]:
    """Run independent experiments (optionally in parallel processes) and rank
    all methods across the successful ones by pooled AUROC. Failed experiments
    are warned about and excluded from the ranking."""
    if not configs:
        raise ConfigError("grid has no experiments")
    reports: list[ExperimentReport] = []
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(_run_one_grid_job, c): c for c in configs}
            for future, config in futures.items():
                try:
                    reports.append(future.result())
                except Exception as exc:  # noqa: BLE001 - isolate failed jobs
                    warnings.warn(f"experiment {config.name!r} failed: {exc}")
    else:
        for config in configs:
            try:
                reports.append(_run_one_grid_job(config))
            except Exception as exc:  # noqa: BLE001 - isolate failed jobs
                warnings.warn(f"experiment {config.name!r} failed: {exc}")
    reports.sort(key=lambda r: [c.name for c in configs].index(r.name))
    if not reports:
        return [], None
    table = rank_experiments(
        [{m: r.metrics[m]["auroc"] for m in r.method_labels} for r in reports],
        [r.name for r in reports],
    )
    return reports, table


def write_rank_table(table: RankTable, path: str) -> None:
    """Emit a rank table as CSV (per-experiment rows plus summary rows)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in table.to_rows():
            writer.writerow(row)
