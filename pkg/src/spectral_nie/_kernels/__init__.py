"""Hot-loop kernels with a compiled core and a NumPy fallback.

The compiled extension ``_ckernels`` is used when it was built and imports
cleanly; otherwise the pure-Python module ``_pykernels`` is used. Setting the
environment variable ``SPECTRAL_NIE_PURE_PYTHON=1`` forces the fallback.
``BACKEND`` names the active implementation.
"""

from __future__ import annotations

import os

from . import _pykernels

try:
    if os.environ.get("SPECTRAL_NIE_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-python backend requested")
    from . import _ckernels as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"

clenshaw = _impl.clenshaw
cos_moments = _impl.cos_moments
delay_euler = _impl.delay_euler

__all__ = ["BACKEND", "clenshaw", "cos_moments", "delay_euler"]
