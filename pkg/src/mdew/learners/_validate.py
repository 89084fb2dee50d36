"""Input checks shared by the learners."""

from __future__ import annotations

import numpy as np

from ..errors import DataError


def check_matrix(X) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise DataError(f"feature matrix must be 2-D and non-empty, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise DataError("feature matrix contains non-finite values")
    return X


def check_target(y, n_rows: int, binary: bool) -> np.ndarray:
    y = np.ascontiguousarray(y, dtype=np.float64)
    if y.shape != (n_rows,):
        raise DataError(f"target shape {y.shape} does not match {n_rows} rows")
    if not np.isfinite(y).all():
        raise DataError("target contains non-finite values")
    if binary and not np.isin(y, (0.0, 1.0)).all():
        raise DataError("classification target must be binary 0/1")
    return y
