"""featgan: adversarial feature super-resolution for small-object detection
on deterministic synthetic scenes.

A tiny convolutional backbone feeds RoI-pooled features to a residual
generator and a two-branch (adversarial + perception) discriminator; the
training loop pretrains perception on large instances, then alternates
generator and adversarial updates. Heavy kernels run via a compiled Cython
backend with a NumPy fallback (see featgan.kernels.BACKEND).
"""

__version__ = "0.1.0"

from .kernels import BACKEND as KERNEL_BACKEND  # noqa: F401
