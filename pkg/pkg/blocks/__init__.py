"""
cINN Blocks Package
-------------------
Conditional coupling blocks, subnetworks, soft clamping and permutations.

License: BSD 3-Clause
"""

from .subnetworks import DenseSubnetwork, ConvSubnetwork
from .coupling import (
    ClampedScale,
    ConditionalCouplingBlock,
    ccb_forward,
    ccb_inverse,
    per_sample_sum,
    DEFAULT_GAMMA,
)
from .permutation import ChannelPermutation, permute

__all__ = [
    'DenseSubnetwork',
    'ConvSubnetwork',
    'ClampedScale',
    'ConditionalCouplingBlock',
    'ccb_forward',
    'ccb_inverse',
    'per_sample_sum',
    'DEFAULT_GAMMA',
    'ChannelPermutation',
    'permute',
]
