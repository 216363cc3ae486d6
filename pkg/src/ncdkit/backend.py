"""Kernel backend selection.

At import time the compiled Cython kernels are preferred; the numpy
fallback is used when the extension is unavailable. `NCDKIT_BACKEND`
(``python`` or ``compiled``) forces a choice, and `set_backend` switches
at runtime (used by the kernel benchmark).
"""

import os

from ncdkit import _pykernels

try:
    from ncdkit import _ckernels
except ImportError:
    _ckernels = None

HAVE_COMPILED = _ckernels is not None

_impl = _pykernels


def _select(name):
    if name == "python":
        return _pykernels
    if name == "compiled":
        if _ckernels is None:
            raise RuntimeError("compiled kernels requested but the extension is not built")
        return _ckernels
    raise ValueError(f"unknown backend {name!r} (expected 'python' or 'compiled')")


def set_backend(name):
    """Switch the active kernel backend; returns the previous backend name."""
    global _impl
    prev = _impl.NAME
    _impl = _select(name)
    return prev


def backend_name():
    return _impl.NAME


def matmul(a, b):
    return _impl.matmul(a, b)


def relu(x):
    return _impl.relu(x)


def relu_grad(x, g):
    return _impl.relu_grad(x, g)


def softmax_rows(x, temperature):
    return _impl.softmax_rows(x, temperature)


def softmax_rows_grad(p, gp, temperature):
    return _impl.softmax_rows_grad(p, gp, temperature)


_env = os.environ.get("NCDKIT_BACKEND")
if _env:
    set_backend(_env)
elif HAVE_COMPILED:
    set_backend("compiled")
