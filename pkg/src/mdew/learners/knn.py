"""k-nearest-neighbor regression on complete data.

Prediction is the unweighted mean of the k nearest training targets under
Euclidean distance; distance ties resolve toward lower training-row index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from ._validate import check_matrix, check_target

__all__ = ["KnnRegressor", "fit_knn_regressor"]

_CHUNK = 256


@dataclass(frozen=True)
class KnnRegressor:
    X_train: np.ndarray
    y_train: np.ndarray
    k: int

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = check_matrix(X)
        if X.shape[1] != self.X_train.shape[1]:
            raise ValueError(
                f"expected {self.X_train.shape[1]} features, got {X.shape[1]}"
            )
        n = self.X_train.shape[0]
        k = min(self.k, n)
        out = np.empty(X.shape[0])
        for start in range(0, X.shape[0], _CHUNK):
            q = X[start : start + _CHUNK]
            d2 = ((q[:, None, :] - self.X_train[None, :, :]) ** 2).sum(axis=2)
            nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
            out[start : start + _CHUNK] = self.y_train[nearest].mean(axis=1)
        return out


def fit_knn_regressor(X: np.ndarray, y: np.ndarray, k: int = 5) -> KnnRegressor:
    X = check_matrix(X)
    y = check_target(y, X.shape[0], binary=False)
    if k < 1:
        raise DataError(f"k must be at least 1, got {k}")
    return KnnRegressor(X_train=X, y_train=y, k=int(k))
