"""Kernel backend selection.

The compiled extension is preferred when importable; setting
``BANDSELECT_PURE_PYTHON=1`` forces the numpy fallback. Both expose the same
two entry points and produce identical results.
"""

import os

if os.environ.get("BANDSELECT_PURE_PYTHON") == "1":
    from . import _pykernels as _impl

    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:
        from . import _pykernels as _impl

        BACKEND = "python"

glcm_counts = _impl.glcm_counts
slic_assign = _impl.slic_assign

__all__ = ["BACKEND", "glcm_counts", "slic_assign"]
