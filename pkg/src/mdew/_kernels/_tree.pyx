# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled tree kernel.

Mirrors mdew._kernels._tree_py operation for operation (same sort order, same
summation order, same comparison rules) so both lanes produce bit-identical
trees and predictions. Keep the two files in sync when changing either.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

__all__ = ["build_tree", "predict_tree"]


cdef void _stable_argsort(const double[:, ::1] X, Py_ssize_t f,
                          int* out, int* buf, Py_ssize_t m) noexcept nogil:
    # Bottom-up mergesort of slot ids by X[slot, f]; merge prefers the left
    # run on ties, which reproduces numpy's stable argsort exactly.
    cdef Py_ssize_t width, lo, mid, hi, i, l, r, k
    for i in range(m):
        out[i] = <int> i
    width = 1
    while width < m:
        lo = 0
        while lo + width < m:
            mid = lo + width
            hi = mid + width
            if hi > m:
                hi = m
            l = lo
            r = mid
            k = lo
            while l < mid and r < hi:
                if X[out[l], f] <= X[out[r], f]:
                    buf[k] = out[l]
                    l += 1
                else:
                    buf[k] = out[r]
                    r += 1
                k += 1
            while l < mid:
                buf[k] = out[l]
                l += 1
                k += 1
            while r < hi:
                buf[k] = out[r]
                r += 1
                k += 1
            for i in range(lo, hi):
                out[i] = buf[i]
            lo += 2 * width
        width *= 2


def build_tree(double[:, ::1] X, double[::1] y, double[::1] w,
               int max_depth, int min_samples_leaf, int criterion,
               subsets):
    """Compiled twin of _tree_py.build_tree; see that module for the contract."""
    cdef Py_ssize_t m = X.shape[0]
    cdef Py_ssize_t d = X.shape[1]
    cdef long long by_rows = 2 * <long long> m - 1
    cdef long long cap
    if max_depth >= 30:
        cap = by_rows
    else:
        cap = (<long long> 1 << (max_depth + 1)) - 1
        if by_rows < cap:
            cap = by_rows
    if cap < 1:
        cap = 1

    feature_arr = np.full(cap, -1, dtype=np.int32)
    threshold_arr = np.full(cap, np.nan, dtype=np.float64)
    left_arr = np.full(cap, -1, dtype=np.int32)
    right_arr = np.full(cap, -1, dtype=np.int32)
    count_arr = np.zeros(cap, dtype=np.int64)
    sum_y_arr = np.zeros(cap, dtype=np.float64)
    sum_w_arr = np.zeros(cap, dtype=np.float64)
    cdef int[::1] feature = feature_arr
    cdef double[::1] threshold = threshold_arr
    cdef int[::1] left = left_arr
    cdef int[::1] right = right_arr
    cdef long long[::1] count = count_arr
    cdef double[::1] sum_y = sum_y_arr
    cdef double[::1] sum_w = sum_w_arr

    sorted_idx_arr = np.empty((d, m), dtype=np.int32)
    cdef int[:, ::1] sorted_idx = sorted_idx_arr
    buf_arr = np.empty(m, dtype=np.int32)
    cdef int[::1] buf = buf_arr
    goes_left_arr = np.zeros(m, dtype=np.uint8)
    cdef unsigned char[::1] goes_left = goes_left_arr

    cdef bint full_features = subsets is None
    cdef int[:, ::1] subs
    cdef Py_ssize_t n_sub = d
    if not full_features:
        subs = np.ascontiguousarray(subsets, dtype=np.int32)
        n_sub = subs.shape[1]
    else:
        subs = np.empty((1, 1), dtype=np.int32)

    stack_arr = np.empty((cap + 1, 5), dtype=np.int64)
    cdef long long[:, ::1] stack = stack_arr
    cdef Py_ssize_t sp = 0
    stack[0, 0] = 0
    stack[0, 1] = m
    stack[0, 2] = 0
    stack[0, 3] = -1
    stack[0, 4] = 0
    sp = 1

    cdef Py_ssize_t n_nodes = 0, attempts = 0
    cdef Py_ssize_t lo, hi, depth, parent, is_left, node, nn, i, k, fi, f, slot, mid
    cdef Py_ssize_t nl, nr, n_left, a, b
    cdef double s_y, s_w, yv, ymin, ymax, total, run, sl, sr, gain, best_gain
    cdef double cur_v, next_v, thr, best_thr
    cdef Py_ssize_t best_f
    cdef bint gl

    for f in range(d):
        _stable_argsort(X, f, &sorted_idx[f, 0], &buf[0], m)

    while sp > 0:
        sp -= 1
        lo = stack[sp, 0]
        hi = stack[sp, 1]
        depth = stack[sp, 2]
        parent = stack[sp, 3]
        is_left = stack[sp, 4]
        node = n_nodes
        n_nodes += 1
        if parent >= 0:
            if is_left:
                left[parent] = <int> node
            else:
                right[parent] = <int> node

        nn = hi - lo
        s_y = 0.0
        s_w = 0.0
        ymin = y[sorted_idx[0, lo]]
        ymax = ymin
        for i in range(lo, hi):
            slot = sorted_idx[0, i]
            yv = y[slot]
            s_y += yv
            s_w += w[slot]
            if yv < ymin:
                ymin = yv
            if yv > ymax:
                ymax = yv
        count[node] = nn
        sum_y[node] = s_y
        sum_w[node] = s_w

        if depth >= max_depth or nn < 2 * min_samples_leaf or ymin == ymax:
            continue

        attempts += 1
        best_gain = -np.inf
        best_f = -1
        best_thr = np.nan
        for fi in range(n_sub):
            if full_features:
                f = fi
            else:
                f = subs[attempts - 1, fi]
            total = 0.0
            for i in range(lo, hi):
                total += y[sorted_idx[f, i]]
            run = 0.0
            for k in range(nn - 1):
                slot = sorted_idx[f, lo + k]
                run += y[slot]
                cur_v = X[slot, f]
                next_v = X[sorted_idx[f, lo + k + 1], f]
                nl = k + 1
                nr = nn - nl
                if next_v > cur_v and nl >= min_samples_leaf and nr >= min_samples_leaf:
                    sl = run
                    sr = total - sl
                    if criterion == 0:
                        gain = sl * sl / (<double> nl) + sr * sr / (<double> nr)
                    else:
                        gain = (sl * sl + ((<double> nl) - sl) * ((<double> nl) - sl)) / (<double> nl) \
                            + (sr * sr + ((<double> nr) - sr) * ((<double> nr) - sr)) / (<double> nr)
                    if gain > best_gain:
                        best_gain = gain
                        best_f = f
                        thr = 0.5 * (cur_v + next_v)
                        if thr == next_v:
                            thr = cur_v
                        best_thr = thr

        if best_f < 0:
            continue

        feature[node] = <int> best_f
        threshold[node] = best_thr
        n_left = 0
        for i in range(lo, hi):
            slot = sorted_idx[0, i]
            gl = X[slot, best_f] <= best_thr
            goes_left[slot] = gl
            n_left += gl
        for f in range(d):
            a = 0
            b = n_left
            for i in range(lo, hi):
                slot = sorted_idx[f, i]
                if goes_left[slot]:
                    buf[a] = <int> slot
                    a += 1
                else:
                    buf[b] = <int> slot
                    b += 1
            for i in range(nn):
                sorted_idx[f, lo + i] = buf[i]
        mid = lo + n_left
        stack[sp, 0] = mid
        stack[sp, 1] = hi
        stack[sp, 2] = depth + 1
        stack[sp, 3] = node
        stack[sp, 4] = 0
        sp += 1
        stack[sp, 0] = lo
        stack[sp, 1] = mid
        stack[sp, 2] = depth + 1
        stack[sp, 3] = node
        stack[sp, 4] = 1
        sp += 1

    out = slice(0, n_nodes)
    return {
        "feature": feature_arr[out].copy(),
        "threshold": threshold_arr[out].copy(),
        "left": left_arr[out].copy(),
        "right": right_arr[out].copy(),
        "count": count_arr[out].copy(),
        "sum_y": sum_y_arr[out].copy(),
        "sum_w": sum_w_arr[out].copy(),
    }


def predict_tree(int[::1] feature, double[::1] threshold, int[::1] left,
                 int[::1] right, double[::1] value, double[:, ::1] X):
    """Route rows of X to leaves and return the leaf values."""
    cdef Py_ssize_t q = X.shape[0]
    out_arr = np.empty(q, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    cdef int node
    for i in range(q):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out_arr
