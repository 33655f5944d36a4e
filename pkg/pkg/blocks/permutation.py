#!/usr/bin/env python3
"""
Fixed random channel permutations between coupling blocks.

License: BSD 3-Clause
"""

from typing import Optional, Sequence

import numpy as np

from pkg.errors import ContractViolation, ShapeError
from pkg.numerics.layers import Module
from pkg.numerics.rng import RngStreams
from pkg.numerics.tensor import Tensor, as_tensor, take


class ChannelPermutation(Module):
    """
    Bijective channel reordering along axis 1 with zero log-determinant.

    The table is a buffer, so it travels with the checkpoint.
    """

    buffer_names = ('perm',)

    def __init__(self, perm: Sequence[int], seed: Optional[int] = None):
        super().__init__()
        perm = np.asarray(perm, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(len(perm))):
            raise ContractViolation(f"not a permutation: {perm.tolist()}")
        self.perm = perm
        self.seed = seed

    @classmethod
    def random(cls, channels: int, seed: int) -> 'ChannelPermutation':
        rng = RngStreams(seed).generator('permutation')
        return cls(rng.permutation(channels), seed=seed)

    @classmethod
    def identity(cls, channels: int) -> 'ChannelPermutation':
        return cls(np.arange(channels))

    @property
    def channels(self) -> int:
        return len(self.perm)

    @property
    def inverse_perm(self) -> np.ndarray:
        return np.argsort(self.perm)

    def _check(self, x: Tensor) -> None:
        if x.ndim < 2 or x.shape[1] != self.channels:
            raise ShapeError(f"permutation over {self.channels} channels", x.shape)

    def forward(self, x: Tensor) -> Tensor:
        x = as_tensor(x)
        self._check(x)
        return take(x, self.perm, axis=1)

    def inverse(self, x: Tensor) -> Tensor:
        x = as_tensor(x)
        self._check(x)
        return take(x, self.inverse_perm, axis=1)


def permute(x: Tensor, p: ChannelPermutation, direction: str = 'fwd') -> Tensor:
    """
    Apply ``p`` forwards ('fwd') or backwards ('inv').

    Output channel i holds input channel p[i].
    """
    if direction == 'fwd':
        return p.forward(x)
    if direction == 'inv':
        return p.inverse(x)
    raise ContractViolation(f"direction must be 'fwd' or 'inv', got {direction!r}")
