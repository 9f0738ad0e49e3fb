"""Kernel backend selection.

Two interchangeable backends implement the same contracts (see _numpy.py):
a compiled Cython extension and a pure-NumPy implementation. RoI pooling is
bit-identical across them; convolution agrees up to float summation order.

The default "auto" mode routes each operation to whichever backend measures
faster for this workload's shapes: convolutions go to the NumPy backend
(im2col + BLAS beats scalar loops on whole images and on wide proposal
batches), RoI pooling goes to the compiled extension (tight per-bin loops,
far faster than per-bin NumPy dispatch). Without the extension, everything
falls back to NumPy. Override with FEATGAN_KERNELS={auto,compiled,numpy} to
force a single backend end to end.
"""

import os

from . import _numpy as _numpy_backend

_choice = os.environ.get("FEATGAN_KERNELS", "auto").lower()
_compiled_backend = None
if _choice in ("auto", "compiled"):
    try:
        from . import _compiled as _compiled_backend  # type: ignore[no-redef]
    except ImportError:
        if _choice == "compiled":
            raise ImportError(
                "FEATGAN_KERNELS=compiled but the compiled extension is not "
                "built; reinstall with a C toolchain or use FEATGAN_KERNELS=numpy"
            ) from None
elif _choice != "numpy":
    raise ValueError(f"unknown FEATGAN_KERNELS value: {_choice!r}")

if _choice == "compiled" or (_choice == "auto" and _compiled_backend is None):
    _conv = _compiled_backend if _choice == "compiled" else _numpy_backend
    _pool = _conv
    BACKEND = _conv.BACKEND
elif _choice == "numpy":
    _conv = _pool = _numpy_backend
    BACKEND = "numpy"
else:  # auto with the extension present: fastest backend per operation
    _conv = _numpy_backend
    _pool = _compiled_backend
    BACKEND = "auto(conv=numpy,pool=compiled)"

conv2d_fwd = _conv.conv2d_fwd
conv2d_bwd_input = _conv.conv2d_bwd_input
conv2d_bwd_weight = _conv.conv2d_bwd_weight
roi_maxpool_fwd = _pool.roi_maxpool_fwd
roi_maxpool_bwd = _pool.roi_maxpool_bwd


def available_backends():
    names = ["numpy"]
    if _compiled_backend is not None:
        names.append("compiled")
    return names


def get_backend(name):
    """Return a specific backend module (for cross-checks and benchmarks)."""
    if name == "numpy":
        return _numpy_backend
    if name == "compiled":
        if _compiled_backend is None:
            raise ImportError("compiled kernel extension is not built")
        return _compiled_backend
    raise ValueError(f"unknown backend: {name!r}")
