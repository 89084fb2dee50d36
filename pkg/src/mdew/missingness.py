"""Synthetic missingness: MCAR, MAR, and MNAR amputation with audit trails.

All three mechanisms only ever mask cells that are currently observed, record
the original value of every newly masked cell, and are deterministic given
the seed. MAR masks a fixed fraction of columns via a logistic model over a
disjoint set of standardized cause columns, with the intercept calibrated by
bisection so the mean masking probability per masked column hits the target
rate. MNAR additionally hides the cause columns themselves at the same rate,
making the recorded masking probabilities depend on values that may end up
unobserved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset, _column_stats
from .errors import ConfigError, ConvergenceError, DataError
from .mathutil import sigmoid
from .seeding import derive_rng

__all__ = [
    "AmputationPlan",
    "AmputationResult",
    "ampute",
    "ampute_mcar",
    "ampute_mar",
    "ampute_mnar",
    "calibrate_intercept",
    "mar_probabilities",
    "imputation_rmse",
]


@dataclass(frozen=True)
class AmputationPlan:
    """Everything needed to audit or replay a masking decision."""

    mechanism: str
    rate: float
    seed: int
    column_fraction: float | None = None
    cause_fraction: float | None = None
    masked_columns: np.ndarray | None = None
    cause_columns: np.ndarray | None = None
    weights: np.ndarray | None = None
    intercepts: np.ndarray | None = None
    cause_means: np.ndarray | None = None
    cause_stds: np.ndarray | None = None

    def to_dict(self) -> dict:
        def arr(a):
            return None if a is None else np.asarray(a).tolist()

        return {
            "mechanism": self.mechanism,
            "rate": self.rate,
            "seed": self.seed,
            "column_fraction": self.column_fraction,
            "cause_fraction": self.cause_fraction,
            "masked_columns": arr(self.masked_columns),
            "cause_columns": arr(self.cause_columns),
            "weights": arr(self.weights),
            "intercepts": arr(self.intercepts),
            "cause_means": arr(self.cause_means),
            "cause_stds": arr(self.cause_stds),
        }


@dataclass(frozen=True)
class AmputationResult:
    """Amputated dataset plus the plan and ground truth for masked cells."""

    data: Dataset
    plan: AmputationPlan
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    def to_dict(self) -> dict:
        return {
            "plan": self.plan.to_dict(),
            "ground_truth": {
                "rows": self.rows.tolist(),
                "cols": self.cols.tolist(),
                "values": self.values.tolist(),
            },
        }


def _check_rate(rate: float) -> None:
    if not 0.0 < rate < 1.0:
        raise ConfigError(f"missingness rate must be in (0, 1), got {rate}")


def _finish(data: Dataset, plan: AmputationPlan, new_cells: np.ndarray) -> AmputationResult:
    rows, cols = np.nonzero(new_cells)
    truth = data.values[rows, cols].copy()
    values = data.values.copy()
    values[rows, cols] = np.nan
    out = Dataset(values, data.mask | new_cells, data.target, data.column_names, data.row_ids)
    return AmputationResult(out, plan, rows.astype(np.int64), cols.astype(np.int64), truth)


def ampute_mcar(data: Dataset, rate: float, seed: int) -> AmputationResult:
    """Mask each observed cell independently with probability ``rate``.

    A row that would lose every feature gets one of its newly masked cells
    unmasked, chosen uniformly, so no row ends up fully missing.
    """
    _check_rate(rate)
    rng = derive_rng(seed, "mcar")
    observed = ~data.mask
    new_cells = observed & (rng.random(data.values.shape) < rate)
    fully_missing = np.flatnonzero((data.mask | new_cells).all(axis=1))
    for i in fully_missing:
        candidates = np.flatnonzero(new_cells[i])
        if len(candidates) == 0:  # row arrived fully missing; nothing to restore
            continue
        keep = candidates[rng.integers(len(candidates))]
        new_cells[i, keep] = False
    plan = AmputationPlan(mechanism="mcar", rate=rate, seed=seed)
    return _finish(data, plan, new_cells)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _mar_new_cells(
    data: Dataset,
    rate: float,
    rng: np.random.Generator,
    column_fraction: float,
    cause_fraction: float,
) -> tuple[np.ndarray, dict]:
    if not 0.0 < column_fraction <= 1.0:
        raise ConfigError(f"column_fraction must be in (0, 1], got {column_fraction}")
    if not 0.0 <= cause_fraction <= 1.0:
        raise ConfigError(f"cause_fraction must be in [0, 1], got {cause_fraction}")
    d = data.n_features
    n_masked = int(math.ceil(column_fraction * d))
    remaining = d - n_masked
    n_cause = _round_half_up(cause_fraction * remaining)
    if cause_fraction > 0.0:
        n_cause = max(n_cause, 1)
        if remaining < 1:
            raise DataError(
                f"cannot allocate cause columns: {d} features, {n_masked} masked"
            )

    masked_cols = np.sort(rng.permutation(d)[:n_masked]).astype(np.int64)
    candidates = np.setdiff1d(np.arange(d, dtype=np.int64), masked_cols)
    cause_cols = np.sort(rng.permutation(candidates)[:n_cause]).astype(np.int64)

    if n_cause > 0:
        means, stds = _column_stats(data.values[:, cause_cols], data.mask[:, cause_cols])
        z = (data.values[:, cause_cols] - means) / stds
        z = np.where(data.mask[:, cause_cols], 0.0, z)
    else:
        means = np.zeros(0)
        stds = np.ones(0)
        z = np.zeros((data.n_rows, 0))

    observed = ~data.mask
    new_cells = np.zeros(data.values.shape, dtype=bool)
    weights = np.empty((n_masked, n_cause))
    intercepts = np.empty(n_masked)
    for idx, col in enumerate(masked_cols):
        w = rng.standard_normal(n_cause)
        logits = z @ w
        b = calibrate_intercept(logits, rate)
        probs = sigmoid(logits + b)
        new_cells[:, col] = observed[:, col] & (rng.random(data.n_rows) < probs)
        weights[idx] = w
        intercepts[idx] = b

    detail = {
        "masked_columns": masked_cols,
        "cause_columns": cause_cols,
        "weights": weights,
        "intercepts": intercepts,
        "cause_means": means,
        "cause_stds": stds,
    }
    return new_cells, detail


def ampute_mar(
    data: Dataset,
    rate: float = 0.3,
    seed: int = 0,
    column_fraction: float = 0.3,
    cause_fraction: float = 3.0 / 7.0,
) -> AmputationResult:
    """Mask ceil(column_fraction * d) columns conditioned on complete cause columns.

    Per masked column, the masking probability of row i is
    sigmoid(w . z_i + b) with w drawn standard normal over the standardized
    cause features and b calibrated so the mean probability equals ``rate``.
    Cause columns and all other unmasked columns are left untouched.
    """
    _check_rate(rate)
    rng = derive_rng(seed, "mar")
    new_cells, detail = _mar_new_cells(data, rate, rng, column_fraction, cause_fraction)
    plan = AmputationPlan(
        mechanism="mar",
        rate=rate,
        seed=seed,
        column_fraction=column_fraction,
        cause_fraction=cause_fraction,
        **detail,
    )
    return _finish(data, plan, new_cells)


def ampute_mnar(
    data: Dataset,
    rate: float = 0.3,
    seed: int = 0,
    column_fraction: float = 0.3,
    cause_fraction: float = 3.0 / 7.0,
) -> AmputationResult:
    """MAR masking followed by MCAR masking of the cause columns at ``rate``.

    Because the logistic masking probabilities were computed from cause values
    that may themselves end up hidden, the observed data no longer explains
    the missingness.
    """
    _check_rate(rate)
    rng = derive_rng(seed, "mnar")
    new_cells, detail = _mar_new_cells(data, rate, rng, column_fraction, cause_fraction)
    cause_cols = detail["cause_columns"]
    if len(cause_cols):
        observed = ~data.mask[:, cause_cols]
        hit = observed & (rng.random((data.n_rows, len(cause_cols))) < rate)
        new_cells[:, cause_cols] |= hit
    plan = AmputationPlan(
        mechanism="mnar",
        rate=rate,
        seed=seed,
        column_fraction=column_fraction,
        cause_fraction=cause_fraction,
        **detail,
    )
    return _finish(data, plan, new_cells)


_MECHANISMS = {"mcar": ampute_mcar, "mar": ampute_mar, "mnar": ampute_mnar}


def ampute(data: Dataset, mechanism: str, rate: float, seed: int, **kwargs) -> AmputationResult:
    """Dispatch to the requested mechanism ('mcar', 'mar', or 'mnar')."""
    try:
        fn = _MECHANISMS[mechanism]
    except KeyError:
        raise ConfigError(f"unknown mechanism {mechanism!r}") from None
    if mechanism == "mcar" and kwargs:
        raise ConfigError("mcar takes no column_fraction/cause_fraction")
    return fn(data, rate, seed, **kwargs)


def calibrate_intercept(logits: np.ndarray, target_rate: float, tol: float = 1e-6) -> float:
    """Find b in [-30, 30] with mean(sigmoid(logits + b)) within tol of target_rate.

    The mean masking probability is strictly increasing in b, so bisection
    converges; a target unreachable inside the bracket raises.
    """
    _check_rate(target_rate)
    logits = np.asarray(logits, dtype=np.float64)
    if not np.isfinite(logits).all():
        raise DataError("logits must be finite")

    def excess(b: float) -> float:
        return float(np.mean(sigmoid(logits + b))) - target_rate

    lo, hi = -30.0, 30.0
    if excess(lo) > 0.0 or excess(hi) < 0.0:
        raise ConvergenceError("target rate unreachable for these logits in [-30, 30]")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        e = excess(mid)
        if abs(e) <= tol:
            return mid
        if e < 0.0:
            lo = mid
        else:
            hi = mid
    raise ConvergenceError("intercept bisection did not reach tolerance")


def mar_probabilities(plan: AmputationPlan, values: np.ndarray) -> np.ndarray:
    """Recompute per-row masking probabilities for each masked column of a plan.

    Uses the plan's stored standardization, weights, and intercepts against
    the pre-amputation values; column j of the result corresponds to
    plan.masked_columns[j].
    """
    if plan.mechanism not in ("mar", "mnar"):
        raise ConfigError(f"plan mechanism {plan.mechanism!r} has no logistic model")
    z = (values[:, plan.cause_columns] - plan.cause_means) / plan.cause_stds
    z = np.where(np.isnan(z), 0.0, z)
    return sigmoid(z @ plan.weights.T + plan.intercepts)


def imputation_rmse(result: AmputationResult, imputed: np.ndarray) -> float:
    """Root-mean-square error over the newly masked cells only."""
    if len(result.rows) == 0:
        raise DataError("no masked cells to score")
    imputed = np.asarray(imputed, dtype=np.float64)
    if imputed.shape != result.data.values.shape:
        raise DataError(
            f"imputed shape {imputed.shape} != data shape {result.data.values.shape}"
        )
    diff = imputed[result.rows, result.cols] - result.values
    return float(np.sqrt(np.mean(diff**2)))
