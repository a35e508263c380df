"""Build script for the optional compiled kernels.

The package works without them: ``qhavg.kernels`` falls back to the pure
Python implementation when the extension is missing or fails to build.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("QHAVG_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "qhavg._kernels_c",
                    ["src/qhavg/_kernels_c.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
