"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the pure-Python
module.  Set ``QAPRICING_BACKEND=python`` to force the fallback.
"""

import os

from . import _fallback

BACKEND = "python"
kernels = _fallback

if os.environ.get("QAPRICING_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        kernels = _compiled
        BACKEND = "cython"

BACKENDS = {"python": _fallback}
if BACKEND == "cython":
    BACKENDS["cython"] = kernels
