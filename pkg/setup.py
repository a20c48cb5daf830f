import os
import sys

import numpy
from setuptools import Extension, setup

# The compiled kernel is an optimization, not a requirement: if Cython or a C
# compiler is unavailable the package falls back to the NumPy implementation
# at import time.  Set DSPINN_SKIP_EXT=1 to force a pure-Python install.

ext_modules = []
if os.environ.get("DSPINN_SKIP_EXT", "0") != "1":
    try:
        from Cython.Build import cythonize

        extensions = [
            Extension(
                "dspinn._batchjet",
                sources=["src/dspinn/_batchjet.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ]
        ext_modules = cythonize(
            extensions,
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "initializedcheck": False,
                "cdivision": True,
            },
        )
    except ImportError:
        print("warning: Cython not available, building without compiled kernels",
              file=sys.stderr)

setup(ext_modules=ext_modules)
