"""Dataset container, CSV ingestion, standardization, and split planning.

Conventions used throughout the package:

- ``values`` is float64 with shape (n_rows, n_features); missing cells hold
  NaN and are additionally flagged in a boolean ``mask`` (True = missing).
- ``target`` is a binary 0/1 integer vector aligned with rows.
- Standardization statistics are computed over observed cells only, with the
  population (ddof=0) standard deviation; zero-variance columns get std 1 so
  applying the transform is always defined.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .seeding import derive_rng

__all__ = [
    "Dataset",
    "ScalerStats",
    "FoldPlan",
    "dataset_from_arrays",
    "load_csv",
    "write_csv",
    "take",
    "fit_standardizer",
    "matrix_scaler",
    "apply_standardizer",
    "invert_standardizer",
    "stratified_kfold",
    "two_stage_split",
]

DEFAULT_MISSING_TOKENS = ("", "NA", "NaN", "?")


@dataclass(frozen=True)
class Dataset:
    """Tabular binary-classification data with an explicit missingness mask."""

    values: np.ndarray
    mask: np.ndarray
    target: np.ndarray
    column_names: list[str]
    row_ids: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        mask = np.ascontiguousarray(self.mask, dtype=bool)
        target = np.ascontiguousarray(self.target, dtype=np.int64)
        row_ids = np.asarray(self.row_ids)
        if values.ndim != 2:
            raise DataError(f"values must be 2-D, got shape {values.shape}")
        if mask.shape != values.shape:
            raise DataError(f"mask shape {mask.shape} != values shape {values.shape}")
        if target.shape != (values.shape[0],):
            raise DataError(f"target shape {target.shape} does not match {values.shape[0]} rows")
        if row_ids.shape != (values.shape[0],):
            raise DataError("row_ids must align with rows")
        if len(self.column_names) != values.shape[1]:
            raise DataError("column_names must align with feature columns")
        if not np.isin(target, (0, 1)).all():
            raise DataError("target must be binary 0/1")
        if not np.array_equal(np.isnan(values), mask):
            raise DataError("NaN cells in values must coincide exactly with the mask")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "row_ids", row_ids)
        object.__setattr__(self, "column_names", list(self.column_names))

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class ScalerStats:
    """Per-column location/scale computed over observed cells."""

    means: np.ndarray
    stds: np.ndarray


@dataclass(frozen=True)
class FoldPlan:
    """Stratified fold assignment: ``assignments[i]`` is row i's test fold."""

    n_folds: int
    seed: int
    assignments: np.ndarray

    def test_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)

    def to_dict(self) -> dict:
        return {
            "n_folds": self.n_folds,
            "seed": self.seed,
            "assignments": self.assignments.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FoldPlan":
        return cls(int(d["n_folds"]), int(d["seed"]), np.asarray(d["assignments"], dtype=np.int64))


def dataset_from_arrays(
    values: np.ndarray,
    target: np.ndarray,
    column_names: list[str] | None = None,
    row_ids: np.ndarray | None = None,
) -> Dataset:
    """Wrap raw arrays in a Dataset, deriving the mask from NaN cells."""
    values = np.asarray(values, dtype=np.float64)
    if column_names is None:
        column_names = [f"x{j}" for j in range(values.shape[1])]
    if row_ids is None:
        row_ids = np.arange(values.shape[0], dtype=np.int64)
    return Dataset(values, np.isnan(values), np.asarray(target), column_names, row_ids)


def load_csv(
    path: str,
    target_column: str | None,
    missing_tokens: tuple[str, ...] = DEFAULT_MISSING_TOKENS,
) -> Dataset:
    """Read a headered CSV into a Dataset.

    Cells equal to one of ``missing_tokens`` (after stripping surrounding
    whitespace) become missing. The target column must parse to {0, 1} and
    may not be missing; pass ``target_column=None`` for feature-only files,
    in which case the target is all zeros.
    """
    missing = set(missing_tokens)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            dupes = sorted({h for h in header if header.count(h) > 1})
            raise DataError(f"{path}: duplicate column names {dupes}")
        if target_column is not None:
            if target_column not in header:
                raise DataError(f"{path}: target column '{target_column}' not in header")
            target_pos = header.index(target_column)
        else:
            target_pos = -1
        column_names = [h for i, h in enumerate(header) if i != target_pos]

        rows: list[list[float]] = []
        targets: list[int] = []
        for record in reader:
            line = reader.line_num
            if len(record) != len(header):
                raise DataError(
                    f"{path} line {line}: expected {len(header)} cells, got {len(record)}"
                )
            row = []
            for pos, cell in enumerate(record):
                token = cell.strip()
                name = header[pos]
                if pos == target_pos:
                    if token in missing:
                        raise DataError(f"{path} line {line}: missing target value")
                    try:
                        t = float(token)
                    except ValueError:
                        raise DataError(
                            f"{path} line {line}, column '{name}': "
                            f"cannot parse {token!r} as a number"
                        ) from None
                    if t not in (0.0, 1.0):
                        raise DataError(
                            f"{path} line {line}: non-binary target value {token!r}"
                        )
                    targets.append(int(t))
                    continue
                if token in missing:
                    row.append(np.nan)
                    continue
                try:
                    row.append(float(token))
                except ValueError:
                    raise DataError(
                        f"{path} line {line}, column '{name}': "
                        f"cannot parse {token!r} as a number"
                    ) from None
            rows.append(row)

    if not rows:
        raise DataError(f"{path}: no data rows")
    values = np.asarray(rows, dtype=np.float64)
    if target_pos == -1:
        targets = [0] * len(rows)
    return Dataset(
        values=values,
        mask=np.isnan(values),
        target=np.asarray(targets, dtype=np.int64),
        column_names=column_names,
        row_ids=np.arange(len(rows), dtype=np.int64),
    )


def write_csv(
    data: Dataset,
    path: str,
    target_column: str | None = "target",
    missing_token: str = "",
) -> None:
    """Write a Dataset back to CSV, encoding missing cells as ``missing_token``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = list(data.column_names)
        if target_column is not None:
            header.append(target_column)
        writer.writerow(header)
        for i in range(data.n_rows):
            row = [
                missing_token if data.mask[i, j] else repr(float(data.values[i, j]))
                for j in range(data.n_features)
            ]
            if target_column is not None:
                row.append(str(int(data.target[i])))
            writer.writerow(row)


def take(data: Dataset, rows: np.ndarray) -> Dataset:
    """Row-subset a Dataset, preserving row ids."""
    rows = np.asarray(rows, dtype=np.int64)
    return Dataset(
        values=data.values[rows],
        mask=data.mask[rows],
        target=data.target[rows],
        column_names=data.column_names,
        row_ids=data.row_ids[rows],
    )


def _column_stats(values: np.ndarray, mask: np.ndarray | None) -> tuple[np.ndarray, np.ndarray]:
    values = np.asarray(values, dtype=np.float64)
    if mask is None:
        mask = np.zeros(values.shape, dtype=bool)
    observed = ~mask
    counts = observed.sum(axis=0)
    if (counts == 0).any():
        cols = np.flatnonzero(counts == 0).tolist()
        raise DataError(f"columns {cols} have no observed values")
    filled = np.where(observed, values, 0.0)
    means = filled.sum(axis=0) / counts
    centered = np.where(observed, values - means, 0.0)
    variances = (centered**2).sum(axis=0) / counts
    stds = np.sqrt(variances)
    stds[stds == 0.0] = 1.0
    return means, stds


def fit_standardizer(data: Dataset) -> ScalerStats:
    """Observed-cell mean and population std per column; zero variance -> std 1."""
    means, stds = _column_stats(data.values, data.mask)
    return ScalerStats(means=means, stds=stds)


def matrix_scaler(values: np.ndarray) -> ScalerStats:
    """ScalerStats for a complete (no-missing) 2-D array."""
    means, stds = _column_stats(values, None)
    return ScalerStats(means=means, stds=stds)


def _check_stats_width(data: Dataset, stats: ScalerStats) -> None:
    if len(stats.means) != data.n_features:
        raise DataError(
            f"scaler has {len(stats.means)} columns, data has {data.n_features}"
        )


def apply_standardizer(data: Dataset, stats: ScalerStats) -> Dataset:
    """Transform observed cells to (x - mean) / std; masked cells stay missing."""
    _check_stats_width(data, stats)
    values = np.where(data.mask, np.nan, (data.values - stats.means) / stats.stds)
    return Dataset(values, data.mask.copy(), data.target, data.column_names, data.row_ids)


def invert_standardizer(data: Dataset, stats: ScalerStats) -> Dataset:
    """Inverse of apply_standardizer on observed cells."""
    _check_stats_width(data, stats)
    values = np.where(data.mask, np.nan, data.values * stats.stds + stats.means)
    return Dataset(values, data.mask.copy(), data.target, data.column_names, data.row_ids)


def stratified_kfold(data: Dataset, k: int, seed: int) -> FoldPlan:
    """Assign rows to k stratified folds.

    Within each class, fold memberships are shuffled by the seed; fold sizes
    and per-fold positive counts each differ by at most one across folds.
    """
    if k < 2:
        raise DataError(f"need at least 2 folds, got {k}")
    rng = derive_rng(seed, "stratified_kfold")
    assignments = np.full(data.n_rows, -1, dtype=np.int64)

    pos = np.flatnonzero(data.target == 1)
    neg = np.flatnonzero(data.target == 0)
    for label, idx in (("positive", pos), ("negative", neg)):
        if len(idx) < k:
            raise DataError(f"{label} class has {len(idx)} rows, fewer than {k} folds")

    # Folds receiving a positive-class extra are excluded first when handing
    # out negative-class extras, keeping total sizes within one of each other.
    q_pos, r_pos = divmod(len(pos), k)
    fold_order = rng.permutation(k)
    heavy = set(fold_order[:r_pos].tolist())
    q_neg, r_neg = divmod(len(neg), k)
    light_first = np.concatenate(
        [
            rng.permutation(np.asarray(sorted(set(range(k)) - heavy), dtype=np.int64)),
            rng.permutation(np.asarray(sorted(heavy), dtype=np.int64)),
        ]
        if heavy
        else [rng.permutation(k)]
    )
    neg_extra = set(light_first[:r_neg].tolist())

    pos_counts = [q_pos + (1 if f in heavy else 0) for f in range(k)]
    neg_counts = [q_neg + (1 if f in neg_extra else 0) for f in range(k)]
    for idx, counts in ((pos, pos_counts), (neg, neg_counts)):
        shuffled = rng.permutation(idx)
        start = 0
        for f in range(k):
            assignments[shuffled[start : start + counts[f]]] = f
            start += counts[f]

    return FoldPlan(n_folds=k, seed=seed, assignments=assignments)


def two_stage_split(
    data: Dataset,
    train_indices: np.ndarray,
    stage2_fraction: float,
    seed: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Split training rows into a model-fitting stage and a held-out stage.

    Stratified by class with largest-remainder apportionment of the stage-2
    quota, so the stage-2 size is round(fraction * n_train) up to per-class
    non-emptiness clamps. Both stages retain every class.
    """
    train_indices = np.asarray(train_indices, dtype=np.int64)
    n = len(train_indices)
    if not 0.0 < stage2_fraction < 1.0:
        raise DataError(f"stage2_fraction must be in (0, 1), got {stage2_fraction}")
    if n < 2:
        raise DataError("need at least 2 training rows to split")

    rng = derive_rng(seed, "two_stage_split")
    labels = data.target[train_indices]
    classes = [c for c in (0, 1) if (labels == c).any()]
    for c in classes:
        if (labels == c).sum() < 2:
            raise DataError(
                f"class {c} has a single training row and would vanish from one stage"
            )

    total = int(round(stage2_fraction * n))
    total = min(max(total, 1), n - 1)
    quotas = {c: stage2_fraction * (labels == c).sum() for c in classes}
    counts = {c: int(np.floor(quotas[c])) for c in classes}
    leftover = total - sum(counts.values())
    by_remainder = sorted(classes, key=lambda c: (-(quotas[c] - counts[c]), c))
    for c in by_remainder[:leftover]:
        counts[c] += 1
    for c in classes:
        n_c = int((labels == c).sum())
        counts[c] = min(max(counts[c], 1), n_c - 1)

    stage2_parts = []
    for c in classes:
        members = rng.permutation(train_indices[labels == c])
        stage2_parts.append(members[: counts[c]])
    stage2 = np.sort(np.concatenate(stage2_parts))
    stage1 = np.sort(np.setdiff1d(train_indices, stage2, assume_unique=True))
    return stage1, stage2
