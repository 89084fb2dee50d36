"""Tree-kernel lane selection.

Imports the compiled Cython kernel when available, otherwise the pure-numpy
fallback with identical semantics. Set MDEW_PURE_PYTHON=1 to force the
fallback. Both lanes are deterministic and produce bit-identical trees;
benchmarks/bench_kernels.py measures the speed difference.
"""

import os

from . import _tree_py

if os.environ.get("MDEW_PURE_PYTHON") == "1":
    _impl = _tree_py
    BACKEND = "pure-python"
else:
    try:
        from . import _tree as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _tree_py
        BACKEND = "pure-python"

build_tree = _impl.build_tree
predict_tree = _impl.predict_tree

__all__ = ["build_tree", "predict_tree", "BACKEND"]
