"""Build script for the optional compiled kernel extension.

The package works without the extension (a NumPy fallback is selected at
import time), so failure to build it is not fatal: install with
CATHNAV_PURE_PYTHON=1 to skip the compile step entirely.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("CATHNAV_PURE_PYTHON"):
    try:
        import numpy
        from Cython.Build import cythonize

        ext = Extension(
            "cathnav._speedups",
            ["src/cathnav/_speedups.pyx"],
            include_dirs=[numpy.get_include()],
            # -ffp-contract=off keeps float results bit-identical to the
            # NumPy fallback (no fused multiply-add in the rasterizer).
            extra_compile_args=["-O3", "-ffp-contract=off"],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
        ext_modules = cythonize([ext], language_level=3)
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
