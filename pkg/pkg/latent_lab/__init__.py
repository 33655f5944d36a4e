"""
cINN Latent Lab Package
-----------------------
Encode, decode, rescale, transfer, interpolate and analyse latent codes.

License: BSD 3-Clause
"""

from .operations import (
    ALPHA_STRIP,
    GRID_RANGE,
    LatentCode,
    LatentPCA,
    alpha_strip,
    class_style_transfer,
    codes_from_rows,
    decode,
    encode,
    interpolate,
    interpolation_grid,
    latent_pca,
    scale_latent,
    transfer,
)

__all__ = [
    'ALPHA_STRIP',
    'GRID_RANGE',
    'LatentCode',
    'LatentPCA',
    'alpha_strip',
    'class_style_transfer',
    'codes_from_rows',
    'decode',
    'encode',
    'interpolate',
    'interpolation_grid',
    'latent_pca',
    'scale_latent',
    'transfer',
]
