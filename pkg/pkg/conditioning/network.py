#!/usr/bin/env python3
"""
cINN Conditioning - Feature Pyramid Networks
--------------------------------------------
The conditioning network maps the raw condition y to one feature tensor per
resolution level of the flow, highest resolution first. It is trained jointly
with the flow: the maximum-likelihood loss backpropagates through the pyramid
into its parameters.

Three variants:
- ConvConditioningNetwork: from-scratch conv backbone with one stride-2 stage
  per level and a 1x1 tap head per level, for image conditions.
- DenseConditioningNetwork: MLP trunk with a linear head per level, for
  vector conditions.
- DirectConditioning: no parameters; images are average-pooled to each
  level, vectors (e.g. one-hot labels) are passed unchanged to every level.

License: BSD 3-Clause
"""

import logging
from dataclasses import dataclass
from typing import Iterator, List, Sequence, Tuple

import numpy as np

from pkg.errors import ConfigurationError, ShapeError
from pkg.numerics.layers import BatchNorm, Conv2d, Linear, Module, ReLU, Sequential
from pkg.numerics.tensor import Tensor, as_tensor, mean, reshape

logger = logging.getLogger(__name__)

CONDITIONING_KINDS = ('conv', 'dense', 'direct')
DEFAULT_WIDTH = 32


@dataclass
class FeaturePyramid:
    """Condition tensors c^(0) ... c^(K), highest resolution first."""
    levels: List[Tensor]

    def __len__(self) -> int:
        return len(self.levels)

    def __getitem__(self, k: int) -> Tensor:
        return self.levels[k]

    def __iter__(self) -> Iterator[Tensor]:
        return iter(self.levels)

    @property
    def batch_size(self) -> int:
        return self.levels[0].shape[0] if self.levels else 0

    def shapes(self) -> List[Tuple[int, ...]]:
        """Per-sample shape of every level."""
        return [tuple(level.shape[1:]) for level in self.levels]


class ConditioningNetwork(Module):
    """Base class: maps y of ``condition_shape`` to a FeaturePyramid."""

    kind = 'base'

    def __init__(self, condition_shape: Sequence[int]):
        super().__init__()
        self.condition_shape = tuple(condition_shape)

    def output_shapes(self) -> List[Tuple[int, ...]]:
        raise NotImplementedError

    @property
    def num_levels(self) -> int:
        return len(self.output_shapes())

    def freeze(self) -> None:
        """Keep the current (e.g. random) weights fixed during training."""
        for param in self.parameters():
            param.freeze()
        logger.info(f"Conditioning network frozen ({len(self.parameters())} parameters)")

    def _prepare(self, y) -> Tensor:
        y = as_tensor(y)
        if y.ndim == 1 and self.condition_shape == (1,):
            y = reshape(y, (y.shape[0], 1))
        if tuple(y.shape[1:]) != self.condition_shape:
            raise ShapeError("condition does not match the conditioning network",
                             (y.shape[0],) + self.condition_shape, y.shape)
        return y

    def forward(self, y) -> FeaturePyramid:
        return FeaturePyramid(self._levels(self._prepare(y)))

    def _levels(self, y: Tensor) -> List[Tensor]:
        raise NotImplementedError


class ConvConditioningNetwork(ConditioningNetwork):
    """
    Strided conv backbone for (C, H, W) conditions.

    Level 0 keeps the input resolution; every further level halves it.
    """

    kind = 'conv'

    def __init__(self, condition_shape: Sequence[int], widths: Sequence[int],
                 rng: np.random.Generator, zero_init_heads: bool = False):
        super().__init__(condition_shape)
        if len(self.condition_shape) != 3:
            raise ConfigurationError(f"conv conditioning needs (C, H, W), got {self.condition_shape}")
        self.widths = [int(w) for w in widths]
        channels, height, width = self.condition_shape
        factor = 2 ** (len(self.widths) - 1)
        if height % factor or width % factor:
            raise ConfigurationError(
                f"condition {height}x{width} cannot be halved {len(self.widths) - 1} times")
        w0 = self.widths[0]
        self.stem = Sequential(
            Conv2d(channels, w0, 3, rng), ReLU(), BatchNorm(w0),
            Conv2d(w0, w0, 3, rng), ReLU(),
        )
        self.stages = [
            Sequential(
                Conv2d(w_in, w_out, 3, rng, stride=2, padding=1), ReLU(), BatchNorm(w_out),
                Conv2d(w_out, w_out, 3, rng), ReLU(),
            )
            for w_in, w_out in zip(self.widths[:-1], self.widths[1:])
        ]
        self.heads = [Conv2d(w, w, 1, rng, zero_init=zero_init_heads) for w in self.widths]

    def output_shapes(self) -> List[Tuple[int, ...]]:
        _, height, width = self.condition_shape
        return [(w, height // 2 ** k, width // 2 ** k) for k, w in enumerate(self.widths)]

    def _levels(self, y: Tensor) -> List[Tensor]:
        h = self.stem(y)
        levels = [self.heads[0](h)]
        for stage, head in zip(self.stages, self.heads[1:]):
            h = stage(h)
            levels.append(head(h))
        return levels


class DenseConditioningNetwork(ConditioningNetwork):
    """MLP trunk with one linear head per level, for vector conditions."""

    kind = 'dense'

    def __init__(self, condition_shape: Sequence[int], widths: Sequence[int],
                 rng: np.random.Generator, hidden: int = 64, zero_init_heads: bool = False):
        super().__init__(condition_shape)
        self.widths = [int(w) for w in widths]
        in_features = int(np.prod(self.condition_shape))
        self.trunk = Sequential(
            Linear(in_features, hidden, rng), ReLU(),
            Linear(hidden, hidden, rng), ReLU(),
        )
        self.heads = [Linear(hidden, w, rng, zero_init=zero_init_heads) for w in self.widths]

    def output_shapes(self) -> List[Tuple[int, ...]]:
        return [(w,) for w in self.widths]

    def _levels(self, y: Tensor) -> List[Tensor]:
        h = self.trunk(reshape(y, (y.shape[0], -1)))
        return [head(h) for head in self.heads]


class DirectConditioning(ConditioningNetwork):
    """
    Parameter-free conditioning: the raw condition at every level.

    Image conditions are average-pooled by 2^k for level k; vector conditions
    are replicated unchanged.
    """

    kind = 'direct'

    def __init__(self, condition_shape: Sequence[int], num_levels: int = 1):
        super().__init__(condition_shape)
        if num_levels < 1:
            raise ConfigurationError("direct conditioning needs at least one level")
        self._num_levels = num_levels
        if len(self.condition_shape) == 3:
            _, height, width = self.condition_shape
            factor = 2 ** (num_levels - 1)
            if height % factor or width % factor:
                raise ConfigurationError(
                    f"condition {height}x{width} cannot be pooled {num_levels - 1} times")

    def output_shapes(self) -> List[Tuple[int, ...]]:
        if len(self.condition_shape) == 3:
            channels, height, width = self.condition_shape
            return [(channels, height // 2 ** k, width // 2 ** k) for k in range(self._num_levels)]
        return [self.condition_shape] * self._num_levels

    def _levels(self, y: Tensor) -> List[Tensor]:
        if y.ndim != 4:
            return [y] * self._num_levels
        levels = [y]
        n, c, h, w = y.shape
        for k in range(1, self._num_levels):
            f = 2 ** k
            pooled = mean(reshape(y, (n, c, h // f, f, w // f, f)), axis=(3, 5))
            levels.append(pooled)
        return levels


def build_conditioning(kind: str, condition_shape: Sequence[int], widths: Sequence[int],
                       rng: np.random.Generator, hidden: int = 64,
                       zero_init_heads: bool = False) -> ConditioningNetwork:
    """
    Construct a conditioning network by kind.

    Args:
        kind: 'conv', 'dense' or 'direct'
        condition_shape: Per-sample shape of y
        widths: Channel width per level (only the count matters for 'direct')
        rng: Generator for weight initialisation
        hidden: Trunk width of the dense variant
        zero_init_heads: Start every level at zero

    Raises:
        ConfigurationError: For an unknown kind
    """
    if kind == 'conv':
        return ConvConditioningNetwork(condition_shape, widths, rng, zero_init_heads)
    if kind == 'dense':
        return DenseConditioningNetwork(condition_shape, widths, rng, hidden, zero_init_heads)
    if kind == 'direct':
        return DirectConditioning(condition_shape, num_levels=len(widths))
    raise ConfigurationError(f"Unknown conditioning kind: {kind}. Valid options: {CONDITIONING_KINDS}")


def build_pyramid(y, net: ConditioningNetwork) -> FeaturePyramid:
    """Run the conditioning network on a batch of conditions."""
    return net(y)
