"""Pure-numpy tree kernel, interchangeable with the compiled lane.

Both lanes implement the same deterministic recipe so their outputs agree
bit for bit:

- per-feature stable presort at the root, maintained by stable partition;
- sequential prefix sums over the sorted order (np.cumsum accumulates left
  to right, matching the compiled loop exactly);
- candidate splits only between strictly increasing adjacent values, scored
  by sum^2/count terms (variance reduction) or the binary Gini equivalent;
- the first strictly best (feature, position) wins, features scanned in
  ascending order;
- midpoint thresholds, demoted to the left value if rounding reaches the
  right value;
- node ids in depth-first creation order, left child first.

Randomness (bootstrap rows, per-node feature subsets) is drawn by the caller
and passed in, so the kernel itself is fully deterministic.
"""

from __future__ import annotations

import numpy as np

__all__ = ["build_tree", "predict_tree"]


def _node_capacity(m: int, max_depth: int) -> int:
    by_rows = 2 * m - 1
    if max_depth >= 30:
        return max(by_rows, 1)
    return max(min(2 ** (max_depth + 1) - 1, by_rows), 1)


def build_tree(
    X: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    max_depth: int,
    min_samples_leaf: int,
    criterion: int,
    subsets: np.ndarray | None,
) -> dict:
    """Grow a binary decision tree on complete float64 data.

    criterion 0 maximizes sum_left^2/n_left + sum_right^2/n_right of y
    (variance reduction); criterion 1 expects y in {0, 1} and maximizes the
    binary Gini analogue. ``subsets`` holds one ascending feature-id row per
    split attempt; None means all features. Returns parallel node arrays;
    leaves have feature -1 and NaN thresholds.
    """
    m, d = X.shape
    cap = _node_capacity(m, max_depth)
    feature = np.full(cap, -1, dtype=np.int32)
    threshold = np.full(cap, np.nan, dtype=np.float64)
    left = np.full(cap, -1, dtype=np.int32)
    right = np.full(cap, -1, dtype=np.int32)
    count = np.zeros(cap, dtype=np.int64)
    sum_y = np.zeros(cap, dtype=np.float64)
    sum_w = np.zeros(cap, dtype=np.float64)

    sorted_idx = np.empty((d, m), dtype=np.int32)
    for f in range(d):
        sorted_idx[f] = np.argsort(X[:, f], kind="stable").astype(np.int32)
    goes_left = np.zeros(m, dtype=bool)

    n_nodes = 0
    attempts = 0
    stack = [(0, m, 0, -1, False)]
    while stack:
        lo, hi, depth, parent, is_left = stack.pop()
        node = n_nodes
        n_nodes += 1
        if parent >= 0:
            if is_left:
                left[parent] = node
            else:
                right[parent] = node

        slots = sorted_idx[0, lo:hi]
        ys = y[slots]
        nn = hi - lo
        count[node] = nn
        sum_y[node] = float(np.cumsum(ys)[-1])
        sum_w[node] = float(np.cumsum(w[slots])[-1])

        if depth >= max_depth or nn < 2 * min_samples_leaf or ys.min() == ys.max():
            continue

        if subsets is None:
            feats = range(d)
        else:
            feats = subsets[attempts]
        attempts += 1

        best_gain = -np.inf
        best_f = -1
        best_thr = np.nan
        for f in feats:
            idx = sorted_idx[f, lo:hi]
            v = X[idx, f]
            cs = np.cumsum(y[idx])
            total = cs[-1]
            nl = np.arange(1, nn, dtype=np.int64)
            nr = nn - nl
            sl = cs[:-1]
            sr = total - sl
            if criterion == 0:
                gain = sl * sl / nl + sr * sr / nr
            else:
                gain = (sl * sl + (nl - sl) * (nl - sl)) / nl + (
                    sr * sr + (nr - sr) * (nr - sr)
                ) / nr
            valid = (v[1:] > v[:-1]) & (nl >= min_samples_leaf) & (nr >= min_samples_leaf)
            if not valid.any():
                continue
            gain = np.where(valid, gain, -np.inf)
            k = int(np.argmax(gain))
            if gain[k] > best_gain:
                best_gain = float(gain[k])
                best_f = f
                thr = 0.5 * (v[k] + v[k + 1])
                if thr == v[k + 1]:
                    thr = v[k]
                best_thr = thr

        if best_f < 0:
            continue

        feature[node] = best_f
        threshold[node] = best_thr
        goes_left[slots] = X[slots, best_f] <= best_thr
        n_left = int(goes_left[slots].sum())
        for f in range(d):
            seg = sorted_idx[f, lo:hi]
            gl = goes_left[seg]
            sorted_idx[f, lo:hi] = np.concatenate([seg[gl], seg[~gl]])
        mid = lo + n_left
        stack.append((mid, hi, depth + 1, node, False))
        stack.append((lo, mid, depth + 1, node, True))

    sl_ = slice(0, n_nodes)
    return {
        "feature": feature[sl_].copy(),
        "threshold": threshold[sl_].copy(),
        "left": left[sl_].copy(),
        "right": right[sl_].copy(),
        "count": count[sl_].copy(),
        "sum_y": sum_y[sl_].copy(),
        "sum_w": sum_w[sl_].copy(),
    }


def predict_tree(
    feature: np.ndarray,
    threshold: np.ndarray,
    left: np.ndarray,
    right: np.ndarray,
    value: np.ndarray,
    X: np.ndarray,
) -> np.ndarray:
    """Route rows of X to leaves and return the leaf values."""
    q = X.shape[0]
    node = np.zeros(q, dtype=np.int32)
    while True:
        f = feature[node]
        active = np.flatnonzero(f >= 0)
        if len(active) == 0:
            break
        an = node[active]
        x = X[active, f[active]]
        node[active] = np.where(x <= threshold[an], left[an], right[an])
    return value[node]
