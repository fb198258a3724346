"""Backend selection for the StrictBR kernels.

The compiled extension is used when it imports; set ``SPECTRUM_MARKET_PURE=1``
to force the pure-Python fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if not os.environ.get("SPECTRUM_MARKET_PURE"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

br_orbit = _impl.br_orbit
br_lyapunov = _impl.br_lyapunov

CAPACITY = _kernels_py.CAPACITY
GRADIENT = _kernels_py.GRADIENT
RESET_FLOOR = _kernels_py.RESET_FLOOR
OVERFLOW = _kernels_py.OVERFLOW


def backends() -> dict:
    """Every importable backend by name (used by parity tests and the benchmark)."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels

        out["cython"] = _kernels
    except ImportError:
        pass
    return out
