"""
cINN Wavelet Package
--------------------
Invertible Haar wavelet downsampling.

License: BSD 3-Clause
"""

from .haar import (
    HAAR_KERNEL,
    COEFFICIENT_NAMES,
    kernel_orthogonality_error,
    haar_down,
    haar_up,
    squeeze_down,
    squeeze_up,
)

__all__ = [
    'HAAR_KERNEL',
    'COEFFICIENT_NAMES',
    'kernel_orthogonality_error',
    'haar_down',
    'haar_up',
    'squeeze_down',
    'squeeze_up',
]
