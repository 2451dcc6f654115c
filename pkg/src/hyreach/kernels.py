"""Backend selection for the hot re-entry kernels.

The compiled extension is used when it imports; otherwise the numpy
implementation takes over.  ``HYREACH_PURE_PYTHON=1`` forces the fallback.
"""

import logging
import os

from . import _kernels_py

log = logging.getLogger(__name__)

_backend = _kernels_py
BACKEND = "python"

if os.environ.get("HYREACH_PURE_PYTHON") != "1":
    try:
        from . import _ckernels as _backend  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on build
        log.debug("compiled kernels unavailable; using numpy fallback")

rates = _backend.rates
rates_batch = _backend.rates_batch
jacobian = _backend.jacobian
rk4_batch = _backend.rk4_batch
euler_rollout = _backend.euler_rollout

python_kernels = _kernels_py


def compiled_kernels():
    """Return the compiled module, or None when it is not built."""
    try:
        from . import _ckernels

        return _ckernels
    except ImportError:
        return None
