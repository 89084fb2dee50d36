"""Evaluation metrics and statistics, implemented from scratch.

Ranking metrics (AUROC, average precision) use exact tie-aware formulations
that match brute-force pair/step enumeration bit-for-bit at small n. The
one-sided paired t-test computes its own Student-t CDF via the regularized
incomplete beta function (Lentz continued fraction), so no statistics
dependency is needed at runtime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ConvergenceError, DataError
from .mathutil import sigmoid

__all__ = [
    "ScoredSet",
    "TTestResult",
    "PlattMap",
    "CalibrationCurve",
    "RankTable",
    "STUDENT_T_CHECK_GRID",
    "auroc",
    "average_precision",
    "brier",
    "per_sample_errors",
    "fraction_improved",
    "paired_t_test_less",
    "student_t_cdf",
    "regularized_incomplete_beta",
    "platt_calibrate",
    "calibration_curve",
    "rank_experiments",
]

# Accuracy surface the Student-t CDF is validated on (degrees of freedom
# crossed with a t range); the test suite checks agreement with a
# numerical-integration oracle to 1e-8 over this grid.
STUDENT_T_CHECK_GRID = {"df": (1, 5, 30, 1000), "t_range": (-10.0, 10.0)}


@dataclass(frozen=True)
class ScoredSet:
    """Binary targets paired with predicted positive-class probabilities."""

    targets: np.ndarray
    probabilities: np.ndarray
    label: str = ""

    def __post_init__(self):
        y = np.asarray(self.targets)
        p = np.asarray(self.probabilities, dtype=np.float64)
        if y.ndim != 1 or p.ndim != 1 or len(y) != len(p):
            raise DataError("targets and probabilities must be equal-length vectors")
        if len(y) == 0:
            raise DataError("scored set is empty")
        if not np.isin(y, (0, 1)).all():
            raise DataError("targets must contain only 0 and 1")
        if not np.isfinite(p).all() or p.min() < 0.0 or p.max() > 1.0:
            raise DataError("probabilities must lie in [0, 1]")
        object.__setattr__(self, "targets", y.astype(np.int64))
        object.__setattr__(self, "probabilities", p)

    @property
    def n(self) -> int:
        return len(self.targets)


def _tie_average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ascending ranks; tied values share the average of their positions."""
    order = np.argsort(values, kind="stable")
    sv = values[order]
    ranks = np.empty(len(values))
    boundaries = np.flatnonzero(np.r_[True, sv[1:] != sv[:-1], True])
    for g in range(len(boundaries) - 1):
        lo, hi = boundaries[g], boundaries[g + 1]
        ranks[order[lo:hi]] = 0.5 * (lo + hi - 1) + 1.0
    return ranks


def auroc(s: ScoredSet) -> float:
    """Area under the ROC curve: (concordant + 0.5 tied) / (n_pos * n_neg)."""
    y, p = s.targets, s.probabilities
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError(f"AUROC needs both classes (set {s.label!r} has one)")
    ranks = _tie_average_ranks(p)
    rank_sum = float(ranks[y == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def average_precision(s: ScoredSet) -> float:
    """Step-sum AP over descending-score thresholds; equal scores form one step."""
    y, p = s.targets, s.probabilities
    n_pos = int(y.sum())
    if n_pos == 0:
        raise DataError(f"average precision needs >=1 positive (set {s.label!r})")
    order = np.argsort(-p, kind="stable")
    sp = p[order]
    sy = y[order]
    n = len(y)
    ap = 0.0
    recall_prev = 0.0
    tp = 0
    seen = 0
    i = 0
    while i < n:
        j = i
        while j + 1 < n and sp[j + 1] == sp[i]:
            j += 1
        tp += int(sy[i : j + 1].sum())
        seen += j - i + 1
        recall = tp / n_pos
        precision = tp / seen
        ap += (recall - recall_prev) * precision
        recall_prev = recall
        i = j + 1
    return ap


def brier(s: ScoredSet) -> float:
    """Mean squared probability error."""
    return float(np.mean((s.probabilities - s.targets) ** 2))


def per_sample_errors(s: ScoredSet) -> np.ndarray:
    """Elementwise |probability - target|."""
    return np.abs(s.probabilities - s.targets.astype(np.float64))


def fraction_improved(err_a: np.ndarray, err_b: np.ndarray) -> float:
    """Fraction of samples where err_a is strictly smaller; ties do not count."""
    a = np.asarray(err_a, dtype=np.float64)
    b = np.asarray(err_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DataError("error vectors must be equal-length 1-D arrays")
    if len(a) == 0:
        raise DataError("error vectors are empty")
    return float(np.mean(a < b))


# ---------------------------------------------------------------------------
# Student-t distribution via the regularized incomplete beta function.
# ---------------------------------------------------------------------------

_BETA_TOL = 1e-12
_BETA_MAX_ITER = 300
_FPMIN = 1e-300


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    """Continued-fraction kernel, evaluated with Lentz's method."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _BETA_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETA_TOL:
            return h
    raise ConvergenceError(
        f"incomplete-beta continued fraction failed for a={a}, b={b}, x={x}"
    )


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0.0 or b <= 0.0:
        raise ConfigError("beta parameters must be positive")
    if not 0.0 <= x <= 1.0:
        raise ConfigError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def student_t_cdf(t: float, df: float) -> float:
    """P(T <= t) for Student's t with df degrees of freedom."""
    if df <= 0:
        raise ConfigError("degrees of freedom must be positive")
    if t == 0.0:
        return 0.5
    x = df / (df + t * t)
    tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x)
    return 1.0 - tail if t > 0.0 else tail


@dataclass(frozen=True)
class TTestResult:
    """One-sided paired t-test outcome (alternative: mean(a - b) < 0)."""

    t_statistic: float
    degrees_of_freedom: int
    p_value: float
    alternative: str = "less"
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "t_statistic": self.t_statistic,
            "degrees_of_freedom": self.degrees_of_freedom,
            "p_value": self.p_value,
            "alternative": self.alternative,
            "degenerate": self.degenerate,
        }


def paired_t_test_less(err_a: np.ndarray, err_b: np.ndarray) -> TTestResult:
    """Test whether err_a has lower mean than err_b on paired samples.

    p = P(T <= t) with t = mean(d) / (sd(d)/sqrt(n)), d = a - b, sample sd.
    Zero-variance differences short-circuit to the limiting p-value with the
    degenerate flag set (0.5 when the mean difference is also zero).
    """
    a = np.asarray(err_a, dtype=np.float64)
    b = np.asarray(err_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DataError("paired t-test needs equal-length 1-D vectors")
    n = len(a)
    if n < 2:
        raise DataError("paired t-test needs n >= 2")
    d = a - b
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(0.0, n - 1, 0.5, degenerate=True)
        t = math.inf if mean > 0 else -math.inf
        return TTestResult(t, n - 1, 1.0 if mean > 0 else 0.0, degenerate=True)
    t = mean / (sd / math.sqrt(n))
    return TTestResult(t, n - 1, student_t_cdf(t, n - 1))


# ---------------------------------------------------------------------------
# Probability calibration.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PlattMap:
    """Sigmoid score map p -> sigmoid(a*p + b) fit by log-loss minimization."""

    a: float
    b: float
    n_iter: int
    converged: bool
    clamped: bool

    @property
    def increasing(self) -> bool:
        """The map is monotone increasing only when the slope is positive."""
        return self.a > 0.0

    def apply(self, probabilities: np.ndarray) -> np.ndarray:
        p = np.asarray(probabilities, dtype=np.float64)
        return sigmoid(self.a * p + self.b)

    __call__ = apply


_PLATT_MAX_ITER = 100
_PLATT_TOL = 1e-8
_PLATT_SLOPE_LIMIT = 1e3


def _mean_log_loss(y: np.ndarray, q: np.ndarray) -> float:
    eps = 1e-15
    q = np.clip(q, eps, 1.0 - eps)
    return float(-np.mean(y * np.log(q) + (1.0 - y) * np.log(1.0 - q)))


def platt_calibrate(train: ScoredSet) -> PlattMap:
    """Fit the two-parameter sigmoid map by damped Newton iterations.

    Perfectly separated scores drive the slope to infinity; it is clamped at
    |a| <= 1e3 and flagged instead of erroring. Non-convergence without a
    clamp raises ConvergenceError.
    """
    y = train.targets.astype(np.float64)
    if len(np.unique(train.targets)) < 2:
        raise DataError("calibration needs both classes present")
    X = np.column_stack([train.probabilities, np.ones(train.n)])
    theta = np.array([1.0, 0.0])
    n = train.n
    loss = _mean_log_loss(y, sigmoid(X @ theta))
    n_iter = 0
    for n_iter in range(1, _PLATT_MAX_ITER + 1):
        q = sigmoid(X @ theta)
        grad = X.T @ (q - y) / n
        if float(np.max(np.abs(grad))) < _PLATT_TOL:
            return PlattMap(float(theta[0]), float(theta[1]), n_iter, True, False)
        hess = (X * (q * (1.0 - q))[:, None]).T @ X / n + 1e-12 * np.eye(2)
        step = np.linalg.solve(hess, grad)
        scale = 1.0
        for _ in range(40):
            trial = theta - scale * step
            trial_loss = _mean_log_loss(y, sigmoid(X @ trial))
            if trial_loss <= loss:
                break
            scale *= 0.5
        theta = theta - scale * step
        loss = _mean_log_loss(y, sigmoid(X @ theta))
        if abs(theta[0]) > _PLATT_SLOPE_LIMIT:
            theta[0] = math.copysign(_PLATT_SLOPE_LIMIT, theta[0])
            return PlattMap(float(theta[0]), float(theta[1]), n_iter, True, True)
    raise ConvergenceError(f"sigmoid calibration did not converge in {_PLATT_MAX_ITER} iterations")


@dataclass(frozen=True)
class CalibrationCurve:
    """Uniform-width probability bins with per-bin prediction/outcome means."""

    n_bins: int
    bin_edges: np.ndarray
    mean_predicted: np.ndarray
    fraction_positive: np.ndarray
    counts: np.ndarray

    @property
    def occupied(self) -> np.ndarray:
        """Empty bins carry count 0 and NaN means; this masks them out."""
        return self.counts > 0


def calibration_curve(s: ScoredSet, n_bins: int = 10) -> CalibrationCurve:
    """Bin predictions into n_bins uniform bins on [0, 1]; last bin right-closed."""
    if n_bins < 2:
        raise ConfigError("n_bins must be >= 2")
    p = s.probabilities
    y = s.targets.astype(np.float64)
    idx = np.minimum((p * n_bins).astype(np.int64), n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    sums_p = np.bincount(idx, weights=p, minlength=n_bins)
    sums_y = np.bincount(idx, weights=y, minlength=n_bins)
    with np.errstate(invalid="ignore"):
        mean_predicted = np.where(counts > 0, sums_p / np.maximum(counts, 1), np.nan)
        fraction_positive = np.where(counts > 0, sums_y / np.maximum(counts, 1), np.nan)
    return CalibrationCurve(
        n_bins=n_bins,
        bin_edges=np.linspace(0.0, 1.0, n_bins + 1),
        mean_predicted=mean_predicted,
        fraction_positive=fraction_positive,
        counts=counts,
    )


# ---------------------------------------------------------------------------
# Cross-experiment ranking.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RankTable:
    """Per-experiment method ranks (1 = best score) with median/IQR summary."""

    labels: list[str]
    experiment_names: list[str]
    ranks: np.ndarray
    median_rank: dict[str, float] = field(default_factory=dict)
    iqr_rank: dict[str, float] = field(default_factory=dict)

    def to_rows(self) -> list[list]:
        """CSV-ready rows: one per experiment, then median and IQR summary rows."""
        rows = [["experiment"] + self.labels]
        for i, name in enumerate(self.experiment_names):
            rows.append([name] + [repr(float(r)) for r in self.ranks[i]])
        rows.append(["median_rank"] + [repr(self.median_rank[l]) for l in self.labels])
        rows.append(["iqr_rank"] + [repr(self.iqr_rank[l]) for l in self.labels])
        return rows


def rank_experiments(
    scores_per_experiment: list[dict[str, float]],
    experiment_names: list[str] | None = None,
) -> RankTable:
    """Rank method labels within each experiment by descending score.

    Rank 1 is the best score; ties receive the average of the positions they
    span. Every experiment must score the same label set.
    """
    if not scores_per_experiment:
        raise DataError("no experiments to rank")
    labels = sorted(scores_per_experiment[0])
    for i, scores in enumerate(scores_per_experiment):
        if sorted(scores) != labels:
            raise DataError(
                f"experiment {i} scores labels {sorted(scores)}, expected {labels}"
            )
    if experiment_names is None:
        experiment_names = [f"experiment_{i}" for i in range(len(scores_per_experiment))]
    if len(experiment_names) != len(scores_per_experiment):
        raise DataError("experiment_names length does not match experiments")
    ranks = np.empty((len(scores_per_experiment), len(labels)))
    for i, scores in enumerate(scores_per_experiment):
        values = np.array([scores[l] for l in labels], dtype=np.float64)
        ranks[i] = _tie_average_ranks(-values)
    median = {l: float(np.median(ranks[:, j])) for j, l in enumerate(labels)}
    iqr = {
        l: float(np.percentile(ranks[:, j], 75) - np.percentile(ranks[:, j], 25))
        for j, l in enumerate(labels)
    }
    return RankTable(
        labels=labels,
        experiment_names=list(experiment_names),
        ranks=ranks,
        median_rank=median,
        iqr_rank=iqr,
    )
