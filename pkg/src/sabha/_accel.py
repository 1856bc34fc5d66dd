"""JIT selection for the numeric kernels.

Kernels are compiled with numba unless ``SABHA_PURE_NUMPY`` is set to a
truthy value, in which case the decorator is a no-op and the same source
runs as plain numpy.  The flag is read once, at import time.
"""

import os

_FALSEY = ("", "0", "false", "no", "off")

PURE_NUMPY = os.environ.get("SABHA_PURE_NUMPY", "").strip().lower() not in _FALSEY

if not PURE_NUMPY:
    try:
        import numba
    except ImportError:  # pragma: no cover - numba is a hard dependency
        PURE_NUMPY = True

if PURE_NUMPY:

    def jit(func=None, **_kwargs):
        if callable(func):
            return func
        return lambda f: f

else:

    def jit(func=None, **kwargs):
        kwargs.setdefault("cache", True)
        kwargs.setdefault("nogil", True)
        if callable(func):
            return numba.njit(**kwargs)(func)
        return numba.njit(**kwargs)


def backend():
    """Name of the active kernel backend, ``"numba"`` or ``"numpy"``."""
    return "numpy" if PURE_NUMPY else "numba"
