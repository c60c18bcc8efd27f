"""Kernel backend selection.

The hot numerical kernels exist twice: compiled (geoembed._core, Cython)
and portable (geoembed._kernels_py, NumPy). By default the compiled core
is used when importable. Set GEOEMBED_BACKEND=python or =cython to force
one; "cython" raises if the extension is missing.

The uint64 random stream is bit-identical across backends. Floating
point results agree to rounding but not bit for bit (different BLAS /
libm paths), so seeded runs are reproducible per backend.
"""

import os

from . import _kernels_py

_requested = os.environ.get("GEOEMBED_BACKEND", "auto").lower()

if _requested not in ("auto", "cython", "python"):
    raise ImportError(
        f"GEOEMBED_BACKEND={_requested!r} not recognized "
        "(expected auto, cython, or python)"
    )

if _requested == "python":
    kernels = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _core as kernels  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        kernels = _kernels_py
        BACKEND = "python"


def backend_name():
    """Name of the active kernel backend: 'cython' or 'python'."""
    return BACKEND


def available_backends():
    """Mapping of backend name -> kernels module, for every importable one."""
    out = {"python": _kernels_py}
    try:
        from . import _core

        out["cython"] = _core
    except ImportError:
        pass
    return out
