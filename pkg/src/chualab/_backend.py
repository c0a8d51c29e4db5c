"""Kernel backend selection.

The compiled extension ``chualab._core`` is used when importable; otherwise
(or with ``CHUALAB_PURE_PYTHON=1`` in the environment) the pure-Python
kernels in ``chualab._pycore`` are loaded. Both expose the same functions.
"""

import os

from . import _pycore as python_kernels

compiled_kernels = None
if not os.environ.get("CHUALAB_PURE_PYTHON"):
    try:
        from . import _core as compiled_kernels
    except ImportError:  # extension not built
        compiled_kernels = None

kernels = compiled_kernels if compiled_kernels is not None else python_kernels
BACKEND = "compiled" if kernels is compiled_kernels else "python"
