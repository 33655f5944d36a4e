#!/usr/bin/env python3
"""
cINN Flow - Stages
------------------
One invertible step of a FlowModel. Every stage maps a batch forwards and
backwards and knows its own output shape. Couplings contribute a
log-determinant; splits hand half their channels to the latent vector.

License: BSD 3-Clause
"""

from typing import Optional, Sequence, Tuple

import numpy as np

from pkg.blocks.coupling import ConditionalCouplingBlock
from pkg.blocks.permutation import ChannelPermutation
from pkg.conditioning.network import FeaturePyramid
from pkg.errors import ConfigurationError, ShapeError
from pkg.numerics.layers import Module
from pkg.numerics.tensor import Tensor, broadcast_to, concat, reshape, split
from pkg.wavelet.haar import haar_down, haar_up, squeeze_down, squeeze_up

Shape = Tuple[int, ...]
StageResult = Tuple[Tensor, Optional[Tensor], Optional[Tensor]]


class Stage(Module):
    """
    Base stage.

    ``forward`` returns ``(output, logdet or None, split_off or None)``;
    ``inverse`` receives the split-off part back for split stages.
    """

    type_name = 'stage'

    def __init__(self, input_shape: Sequence[int]):
        super().__init__()
        self.input_shape: Shape = tuple(input_shape)

    @property
    def output_shape(self) -> Shape:
        return self.input_shape

    @property
    def split_shape(self) -> Optional[Shape]:
        return None

    def forward(self, x: Tensor, pyramid: Optional[FeaturePyramid]) -> StageResult:
        raise NotImplementedError

    def inverse(self, x: Tensor, pyramid: Optional[FeaturePyramid],
                split_off: Optional[Tensor] = None) -> Tensor:
        raise NotImplementedError


class CouplingStage(Stage):
    """
    A conditional coupling block at resolution level ``level``.

    Conv blocks act on images, dense blocks on vectors. The level's condition
    is adapted to the block: image conditions are flattened for dense blocks,
    vector conditions are broadcast over the image for conv blocks.
    """

    type_name = 'coupling'

    def __init__(self, input_shape: Sequence[int], level: int,
                 level_condition_shape: Optional[Sequence[int]],
                 rng: np.random.Generator, hidden: int = 64, clamp: bool = True,
                 gamma_init: float = 0.1, batch_norm: bool = True):
        super().__init__(input_shape)
        self.level = level
        kind = 'conv' if len(self.input_shape) == 3 else 'dense'
        self.adapter = None
        block_condition: Shape = ()
        if level_condition_shape is not None:
            cond = tuple(level_condition_shape)
            if kind == 'dense':
                block_condition = (int(np.prod(cond)),)
                self.adapter = 'flatten' if len(cond) != 1 else None
            elif len(cond) == 1:
                block_condition = (cond[0],) + self.input_shape[1:]
                self.adapter = 'tile'
            elif cond[1:] != self.input_shape[1:]:
                raise ConfigurationError(
                    f"level {level} condition {cond} does not match data resolution "
                    f"{self.input_shape[1:]}")
            else:
                block_condition = cond
        self.block = ConditionalCouplingBlock(
            self.input_shape[0], block_condition, rng, kind=kind, hidden=hidden,
            clamp=clamp, gamma_init=gamma_init, batch_norm=batch_norm)

    def _condition(self, pyramid: Optional[FeaturePyramid]) -> Optional[Tensor]:
        if not self.block.condition_shape:
            return None
        if pyramid is None or self.level >= len(pyramid):
            raise ShapeError(f"no condition for level {self.level}",
                             self.block.condition_shape)
        c = pyramid[self.level]
        n = c.shape[0]
        if self.adapter == 'flatten':
            return reshape(c, (n, -1))
        if self.adapter == 'tile':
            spatial = self.input_shape[1:]
            return broadcast_to(reshape(c, (n, c.shape[1], 1, 1)), (n, c.shape[1]) + spatial)
        return c

    def forward(self, x: Tensor, pyramid: Optional[FeaturePyramid]) -> StageResult:
        v, logdet = self.block.forward(x, self._condition(pyramid))
        return v, logdet, None

    def inverse(self, x: Tensor, pyramid: Optional[FeaturePyramid],
                split_off: Optional[Tensor] = None) -> Tensor:
        u, _ = self.block.inverse(x, self._condition(pyramid))
        return u


class PermutationStage(Stage):
    type_name = 'permute'

    def __init__(self, input_shape: Sequence[int], seed: int):
        super().__init__(input_shape)
        self.permutation = ChannelPermutation.random(self.input_shape[0], seed)

    def forward(self, x: Tensor, pyramid: Optional[FeaturePyramid]) -> StageResult:
        return self.permutation.forward(x), None, None

    def inverse(self, x: Tensor, pyramid: Optional[FeaturePyramid],
                split_off: Optional[Tensor] = None) -> Tensor:
        return self.permutation.inverse(x)


class DownsampleStage(Stage):
    """Haar wavelet or naive squeeze: (C, H, W) -> (4C, H/2, W/2)."""

    def __init__(self, input_shape: Sequence[int], method: str = 'haar'):
        super().__init__(input_shape)
        if len(self.input_shape) != 3:
            raise ConfigurationError(f"{method} needs image data, got shape {self.input_shape}")
        c, h, w = self.input_shape
        if h % 2 or w % 2:
            raise ConfigurationError(f"{method}: cannot halve {h}x{w}")
        self.method = method
        self.type_name = method

    @property
    def output_shape(self) -> Shape:
        c, h, w = self.input_shape
        return (4 * c, h // 2, w // 2)

    def forward(self, x: Tensor, pyramid: Optional[FeaturePyramid]) -> StageResult:
        down = haar_down if self.method == 'haar' else squeeze_down
        return down(x), None, None

    def inverse(self, x: Tensor, pyramid: Optional[FeaturePyramid],
                split_off: Optional[Tensor] = None) -> Tensor:
        up = haar_up if self.method == 'haar' else squeeze_up
        return up(x)


class SplitStage(Stage):
    """Keep the first ceil(C/2) channels, send the last floor(C/2) to z."""

    type_name = 'split'

    def __init__(self, input_shape: Sequence[int]):
        super().__init__(input_shape)
        c = self.input_shape[0]
        if c < 2:
            raise ConfigurationError(f"cannot split {c} channel(s)")
        self.sizes = (c - c // 2, c // 2)

    @property
    def output_shape(self) -> Shape:
        return (self.sizes[0],) + self.input_shape[1:]

    @property
    def split_shape(self) -> Optional[Shape]:
        return (self.sizes[1],) + self.input_shape[1:]

    def forward(self, x: Tensor, pyramid: Optional[FeaturePyramid]) -> StageResult:
        kept, off = split(x, self.sizes, axis=1)
        return kept, None, off

    def inverse(self, x: Tensor, pyramid: Optional[FeaturePyramid],
                split_off: Optional[Tensor] = None) -> Tensor:
        if split_off is None:
            raise ShapeError("split inverse needs the split-off channels", self.split_shape)
        return concat([x, split_off], axis=1)


class FlattenStage(Stage):
    type_name = 'flatten'

    @property
    def output_shape(self) -> Shape:
        return (int(np.prod(self.input_shape)),)

    def forward(self, x: Tensor, pyramid: Optional[FeaturePyramid]) -> StageResult:
        return reshape(x, (x.shape[0],) + self.output_shape), None, None

    def inverse(self, x: Tensor, pyramid: Optional[FeaturePyramid],
                split_off: Optional[Tensor] = None) -> Tensor:
        return reshape(x, (x.shape[0],) + self.input_shape)
