"""Select the compiled kernels when available, numpy otherwise.

Set ``IONCORR_BACKEND=python`` to force the numpy fallback.
"""

import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

AVAILABLE = {"python": _kernels_py}
if _compiled is not None:
    AVAILABLE["cython"] = _compiled

_requested = os.environ.get("IONCORR_BACKEND", "").strip().lower()
if _requested and _requested not in ("python", "cython"):
    raise ImportError(f"IONCORR_BACKEND must be 'python' or 'cython', got {_requested!r}")
if _requested == "cython" and _compiled is None:
    raise ImportError("IONCORR_BACKEND=cython but the compiled extension is not built")

NAME = _requested or ("cython" if _compiled is not None else "python")
_active = AVAILABLE[NAME]

eq2_moments = _active.eq2_moments
subset_product = _active.subset_product


def get(name):
    """Kernel module by name, for benchmarks and cross-backend tests."""
    return AVAILABLE[name]
