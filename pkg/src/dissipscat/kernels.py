"""Select the compiled kernels when available, else the numpy fallback.

Set DISSIPSCAT_PURE_PYTHON=1 to force the fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
radon_planes = _pykernels.radon_planes

if os.environ.get("DISSIPSCAT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        radon_planes = _ckernels.radon_planes
        BACKEND = "compiled"


def thread_count():
    """Worker cap from DISSIPSCAT_THREADS (default: all cores)."""
    env = os.environ.get("DISSIPSCAT_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1
