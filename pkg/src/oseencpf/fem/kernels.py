"""Backend selection for the element kernels.

The compiled extension is used when it imports; set ``OSEENCPF_PURE=1``
to force the NumPy implementation.
"""

import os

from . import _kernels_py

BACKEND = "numpy"
if os.environ.get("OSEENCPF_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
else:
    _impl = _kernels_py

stokes_local = _impl.stokes_local
divergence_local = _impl.divergence_local
convection_local = _impl.convection_local

__all__ = ["BACKEND", "stokes_local", "divergence_local", "convection_local"]
