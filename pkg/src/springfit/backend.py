"""Kernel backend selection.

The compiled extension (springfit._kernels) and the NumPy module
(springfit._kernels_py) expose the same functions with bit-identical
results; the compiled one is preferred when available. Override with
SPRINGFIT_BACKEND=python|cython.
"""

from __future__ import annotations

import os

from . import _kernels_py

_requested = os.environ.get("SPRINGFIT_BACKEND", "auto").lower()

if _requested not in ("auto", "python", "cython"):
    raise ValueError(f"SPRINGFIT_BACKEND must be auto|python|cython, got {_requested!r}")

if _requested == "python":
    kernels = _kernels_py
else:
    try:
        from . import _kernels as _compiled
        kernels = _compiled
    except ImportError:
        if _requested == "cython":
            raise ImportError(
                "SPRINGFIT_BACKEND=cython but the compiled extension is not built; "
                "run `pip install -e . --no-build-isolation`"
            )
        kernels = _kernels_py


def backend_name() -> str:
    return kernels.BACKEND_NAME


def available_backends() -> dict[str, object]:
    """All importable kernel modules keyed by name (for tests/benchmarks)."""
    out = {_kernels_py.BACKEND_NAME: _kernels_py}
    try:
        from . import _kernels as _compiled
        out[_compiled.BACKEND_NAME] = _compiled
    except ImportError:
        pass
    return out
