import os

import numpy as np
from setuptools import Extension, setup

# The compiled kernel is optional; the package falls back to pure Python.
try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("MAGLEV_DREM_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "maglev_drem._kernel",
                ["src/maglev_drem/_kernel.pyx"],
                include_dirs=[np.get_include()],
                # no FMA contraction: the kernel must match the Python loop bit for bit
                extra_compile_args=["-O2", "-ffp-contract=off", "-fno-fast-math"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
