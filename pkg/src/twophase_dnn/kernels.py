"""Hot jet kernels: compiled extension when built, numpy otherwise.

Set ``TWOPHASE_DNN_PURE=1`` to force the numpy implementation.
"""
import os

from . import _kernels_py

BACKEND = "numpy"
tanh_forward = _kernels_py.tanh_forward
tanh_backward = _kernels_py.tanh_backward

if os.environ.get("TWOPHASE_DNN_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _jetkernels
    except ImportError:
        pass
    else:
        tanh_forward = _jetkernels.tanh_forward
        tanh_backward = _jetkernels.tanh_backward
        BACKEND = "cython"


def use(backend: str) -> None:
    """Switch kernels at runtime ("cython" or "numpy"); for benchmarks/tests."""
    global tanh_forward, tanh_backward, BACKEND
    if backend == "numpy":
        tanh_forward, tanh_backward = _kernels_py.tanh_forward, _kernels_py.tanh_backward
    elif backend == "cython":
        from . import _jetkernels
        tanh_forward, tanh_backward = _jetkernels.tanh_forward, _jetkernels.tanh_backward
    else:
        raise ValueError(f"unknown kernel backend {backend!r}")
    BACKEND = backend
