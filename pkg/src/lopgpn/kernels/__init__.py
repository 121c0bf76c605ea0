"""CSR kernel backend, chosen once at import time.

The compiled extension ``_ckernels`` is preferred. Setting the environment
variable ``LOPGPN_PURE_PYTHON=1`` (or a failed build) selects the numpy
fallback in ``_pykernels``. Both modules expose ``spmm``, ``spspmm`` and
``sparsify_to_diagonal`` with identical signatures.
"""

import os

from . import _pykernels

if os.environ.get("LOPGPN_PURE_PYTHON", "") not in ("", "0"):
    _backend = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _backend
        BACKEND = "cython"
    except ImportError:
        _backend = _pykernels
        BACKEND = "python"

spmm = _backend.spmm
spspmm = _backend.spspmm
sparsify_to_diagonal = _backend.sparsify_to_diagonal


def available_backends():
    """Map backend name to module for every backend importable here."""
    found = {"python": _pykernels}
    try:
        from . import _ckernels
        found["cython"] = _ckernels
    except ImportError:
        pass
    return found


__all__ = ["BACKEND", "available_backends", "spmm", "spspmm", "sparsify_to_diagonal"]
