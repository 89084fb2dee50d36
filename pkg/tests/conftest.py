"""Shared fixtures: synthetic dataset makers, the benchmark CSV, and the
acceptance-summary terminal hook."""

from __future__ import annotations

import os

import numpy as np
import pytest

from mdew.data import Dataset, dataset_from_arrays, write_csv
from mdew.seeding import derive_rng

# ---------------------------------------------------------------------------
# Acceptance reporting: each acceptance test records one line; the terminal
# summary prints them all so the pass/fail status of every criterion is
# visible in one block at the end of the run.
# ---------------------------------------------------------------------------

ACCEPTANCE_LINES: list[tuple[str, bool, str]] = []


def record_acceptance(criterion: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append((criterion, passed, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in sorted(ACCEPTANCE_LINES):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{criterion}] {status} — {detail}")


# ---------------------------------------------------------------------------
# Synthetic data makers.
# ---------------------------------------------------------------------------


def make_classification(n: int, d: int, seed: int) -> Dataset:
    """Linear-logit binary classification data with a redundant column."""
    rng = derive_rng(seed, "make-classification")
    X = rng.normal(size=(n, d))
    if d >= 4:
        X[:, d - 1] = 1.5 * X[:, 0] - 0.5 * X[:, 1]
    w = rng.normal(size=d)
    logits = X @ w / np.sqrt(d) * 2.0
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-logits))).astype(int)
    if y.min() == y.max():  # guarantee both classes for tiny n
        y[0] = 1 - y[0]
    return dataset_from_arrays(X, y)


def make_correlated(n: int, d: int, rho: float, seed: int) -> Dataset:
    """All feature pairs share correlation rho via a common latent factor."""
    rng = derive_rng(seed, "make-correlated")
    g = rng.normal(size=(n, 1))
    e = rng.normal(size=(n, d))
    X = np.sqrt(rho) * g + np.sqrt(1.0 - rho) * e
    y = (g[:, 0] > 0).astype(int)
    return dataset_from_arrays(X, y)


def make_two_region(seed: int) -> Dataset:
    """1,000 rows in two halves that favor different imputers.

    Half A: features with exact linear dependencies, so chained-equation
    imputation with a ridge backbone reconstructs masked cells almost
    perfectly. Half B: tight, far-apart clusters whose centers follow an
    XOR-style sign pattern no single linear map fits, so nearest-neighbor
    imputation wins there. Geometric separation between the halves makes
    pipeline competence vary by region.
    """
    rng = derive_rng(seed, "two-region")
    n_half = 500
    z = rng.normal(size=(n_half, 3))
    half_a = np.column_stack(
        [
            z[:, 0],
            z[:, 1],
            z[:, 2],
            2.0 * z[:, 0] - z[:, 1],
            z[:, 0] + 3.0 * z[:, 2],
            z[:, 1] - 2.0 * z[:, 2],
        ]
    )
    y_a = (z[:, 0] + z[:, 2] > 0).astype(int)

    signs = np.array([[(i >> b) & 1 for b in range(3)] for i in range(8)]) * 2 - 1
    centers = np.column_stack(
        [signs * 3.0, signs[:, ::-1] * np.array([3.0, -3.0, 3.0]) * signs[:, :1]]
    )
    which = rng.integers(0, 8, n_half)
    half_b = centers[which] + 0.3 * rng.normal(size=(n_half, 6))
    y_b = (signs[which].prod(axis=1) > 0).astype(int)

    X = np.vstack([half_a, half_b])
    y = np.concatenate([y_a, y_b])
    return dataset_from_arrays(X, y)


# ---------------------------------------------------------------------------
# Benchmark dataset fixture (569x30 binary diagnosis data).
# ---------------------------------------------------------------------------


@pytest.fixture(scope="session")
def bc_csv(tmp_path_factory) -> str:
    """Path to the 569x30 breast-cancer diagnosis CSV.

    Set MDEW_BC_CSV to use a local copy; otherwise the copy bundled with
    scikit-learn (a test-only dependency) is materialized, with the positive
    class mapped to malignant (37.26% of rows).
    """
    override = os.environ.get("MDEW_BC_CSV")
    if override:
        if not os.path.exists(override):
            pytest.skip(f"MDEW_BC_CSV={override} does not exist")
        return override
    try:
        from sklearn.datasets import load_breast_cancer
    except ImportError:
        pytest.skip("scikit-learn unavailable and MDEW_BC_CSV not set")
    raw = load_breast_cancer()
    y = (raw.target == 0).astype(int)  # malignant = positive class
    data = dataset_from_arrays(
        raw.data.astype(np.float64),
        y,
        column_names=[c.replace(" ", "_") for c in raw.feature_names],
    )
    path = tmp_path_factory.mktemp("bc") / "breast_cancer.csv"
    write_csv(data, str(path))
    return str(path)
