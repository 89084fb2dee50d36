"""Benchmark the compiled tree kernel against the pure-numpy fallback.

Both lanes implement identical semantics (bit-identical trees and
predictions); this script measures what the compiled extension buys.
Run from the repository root:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --sizes 2000x20,8000x30 --repeats 5

If the compiled extension is not importable (e.g. the package was installed
with MDEW_PURE_PYTHON builds only), the script reports pure-lane timings and
notes the missing lane instead of failing.
"""

import argparse
import time

import numpy as np

from mdew._kernels import BACKEND, _tree_py

try:
    from mdew._kernels import _tree as _tree_cy
except ImportError:
    _tree_cy = None


def _median_time(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times)), out


def _check_identical(t_py, t_cy):
    for key in ("feature", "left", "right", "count"):
        if not np.array_equal(t_py[key], t_cy[key]):
            return False
    for key in ("threshold", "sum_y", "sum_w"):
        if not np.array_equal(t_py[key], t_cy[key], equal_nan=True):
            return False
    return True


def bench_case(n, d, depth, repeats):
    rng = np.random.default_rng(20260401 + n + d)
    X = rng.normal(size=(n, d))
    y = (X[:, 0] + 0.5 * X[:, 1] + rng.normal(scale=0.5, size=n) > 0).astype(np.float64)
    w = np.ones(n)
    Q = rng.normal(size=(100_000, d))

    rows = []
    build_py, tree_py = _median_time(
        lambda: _tree_py.build_tree(X, y, w, depth, 1, 1, None), repeats
    )
    value = tree_py["sum_y"] / np.maximum(tree_py["sum_w"], 1e-12)
    pred_py, out_py = _median_time(
        lambda: _tree_py.predict_tree(
            tree_py["feature"], tree_py["threshold"], tree_py["left"], tree_py["right"], value, Q
        ),
        repeats,
    )

    if _tree_cy is None:
        rows.append(("build_tree", n, d, None, build_py, None))
        rows.append(("predict_tree", n, d, None, pred_py, None))
        return rows, True

    build_cy, tree_cy = _median_time(
        lambda: _tree_cy.build_tree(X, y, w, depth, 1, 1, None), repeats
    )
    pred_cy, out_cy = _median_time(
        lambda: _tree_cy.predict_tree(
            tree_cy["feature"], tree_cy["threshold"], tree_cy["left"], tree_cy["right"], value, Q
        ),
        repeats,
    )
    identical = _check_identical(tree_py, tree_cy) and np.array_equal(out_py, out_cy)
    rows.append(("build_tree", n, d, build_cy, build_py, build_py / build_cy))
    rows.append(("predict_tree", n, d, pred_cy, pred_py, pred_py / pred_cy))
    return rows, identical


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--sizes",
        default="1000x10,4000x20,8000x30",
        help="comma-separated NxD benchmark shapes",
    )
    parser.add_argument("--depth", type=int, default=6, help="tree depth to build")
    parser.add_argument("--repeats", type=int, default=5, help="repeats per timing (median)")
    args = parser.parse_args()

    print(f"active backend: {BACKEND}")
    if _tree_cy is None:
        print("compiled lane unavailable; timing the pure-numpy lane only\n")
    header = f"{'op':<14}{'n':>7}{'d':>5}{'compiled (s)':>14}{'pure (s)':>12}{'speedup':>9}"
    print(header)
    print("-" * len(header))

    all_identical = True
    for shape in args.sizes.split(","):
        n, d = (int(v) for v in shape.lower().split("x"))
        rows, identical = bench_case(n, d, args.depth, args.repeats)
        all_identical = all_identical and identical
        for op, rn, rd, cy, py, speedup in rows:
            cy_s = f"{cy:.4f}" if cy is not None else "-"
            sp_s = f"{speedup:.1f}x" if speedup is not None else "-"
            print(f"{op:<14}{rn:>7}{rd:>5}{cy_s:>14}{py:>12.4f}{sp_s:>9}")

    if _tree_cy is not None:
        verdict = "identical" if all_identical else "MISMATCH"
        print(f"\ncross-lane outputs: {verdict}")


if __name__ == "__main__":
    main()
