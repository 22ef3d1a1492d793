"""Backend selection for the hot jet kernels.

The compiled extension is used when it imports; setting
``BEREZIN_PURE_PYTHON=1`` forces the pure-Python fallback.
"""
import os

from . import _kernels_py

_kernel = _kernels_py
if os.environ.get("BEREZIN_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _kernel  # type: ignore[no-redef]
    except ImportError:  # pragma: no cover - depends on build
        _kernel = _kernels_py

BACKEND = _kernel.BACKEND
mul = _kernel.mul


def backends():
    """Available kernel modules keyed by name (for benchmarks and tests)."""
    found = {"python": _kernels_py}
    try:
        from . import _ckernels
        found["cython"] = _ckernels
    except ImportError:  # pragma: no cover
        pass
    return found
