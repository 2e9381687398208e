"""Kernel backend selection.

The compiled extension is preferred; ``DIVUDA_PURE_PYTHON=1`` forces the
numpy fallback (used by the parity tests and the benchmark).
"""

import os

if os.environ.get("DIVUDA_PURE_PYTHON") == "1":
    from . import _kernels_py as kernels
else:
    try:
        from . import _ckernels as kernels  # type: ignore[no-redef]
    except ImportError:
        from . import _kernels_py as kernels  # type: ignore[no-redef]


def backend_name():
    return kernels.BACKEND
