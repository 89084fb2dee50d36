"""Small numeric helpers shared across modules."""

from __future__ import annotations

import numpy as np

__all__ = ["sigmoid", "log_loss", "softmax"]


def sigmoid(x: np.ndarray | float) -> np.ndarray | float:
    """Numerically stable logistic function."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    if out.ndim == 0:
        return float(out)
    return out


def log_loss(y: np.ndarray, p: np.ndarray, eps: float = 1e-15) -> float:
    """Mean binary cross-entropy with probability clipping at eps."""
    y = np.asarray(y, dtype=np.float64)
    p = np.clip(np.asarray(p, dtype=np.float64), eps, 1.0 - eps)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def softmax(v: np.ndarray) -> np.ndarray:
    """Softmax with max-shift for stability; invariant to adding a constant."""
    v = np.asarray(v, dtype=np.float64)
    e = np.exp(v - np.max(v))
    return e / e.sum()
