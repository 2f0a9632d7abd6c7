"""Hot numeric kernels with a compiled core and a NumPy fallback.

The Cython extension (``_ck``) is preferred when it was built; setting
``PAIRFORGE_PURE=1`` before import forces the NumPy implementation. Both
backends use the same update order, so results agree to float round-off.
"""

import os

if os.environ.get("PAIRFORGE_PURE"):
    from . import fallback as _impl

    BACKEND = "python"
else:
    try:
        from . import _ck as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import fallback as _impl

        BACKEND = "python"

acc_core = _impl.acc_core
cd_fit = _impl.cd_fit


def backend_name() -> str:
    return BACKEND
