"""
cINN Conditioning Package
-------------------------
Conditioning networks producing the multi-resolution feature pyramid.

License: BSD 3-Clause
"""

from .network import (
    FeaturePyramid,
    ConditioningNetwork,
    ConvConditioningNetwork,
    DenseConditioningNetwork,
    DirectConditioning,
    build_conditioning,
    build_pyramid,
    CONDITIONING_KINDS,
    DEFAULT_WIDTH,
)

__all__ = [
    'FeaturePyramid',
    'ConditioningNetwork',
    'ConvConditioningNetwork',
    'DenseConditioningNetwork',
    'DirectConditioning',
    'build_conditioning',
    'build_pyramid',
    'CONDITIONING_KINDS',
    'DEFAULT_WIDTH',
]
