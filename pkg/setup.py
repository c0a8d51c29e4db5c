import os

import numpy as np
from setuptools import Extension, setup

# CHUALAB_NO_EXT=1 installs the pure-Python package only.
ext_modules = []
if not os.environ.get("CHUALAB_NO_EXT"):
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "chualab._core",
                ["src/chualab/_core.pyx"],
                include_dirs=[np.get_include()],
                # no FMA contraction / fast-math: results must match the
                # pure-Python kernels bit for bit
                extra_compile_args=["-O3", "-ffp-contract=off", "-fno-fast-math"],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )

setup(ext_modules=ext_modules)
