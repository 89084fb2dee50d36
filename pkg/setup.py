"""Build script for the optional compiled tree kernel.

The package is fully functional without the extension: mdew._kernels falls
back to a pure-numpy implementation at import time. Set MDEW_PURE_PYTHON=1
in the environment to skip the extension build entirely.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("MDEW_PURE_PYTHON") != "1":
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "mdew._kernels._tree",
                    sources=["src/mdew/_kernels/_tree.pyx"],
                    include_dirs=[numpy.get_include()],
                    # fp-contract off: gain arithmetic must round exactly like
                    # the numpy fallback so both lanes grow identical trees
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
