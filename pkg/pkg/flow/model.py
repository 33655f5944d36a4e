#!/usr/bin/env python3
"""
cINN Flow - FlowModel
---------------------
Ordered invertible stages with shape bookkeeping.

The latent vector z is assembled from the split-off parts in the order they
are encountered, followed by the final output, each flattened per sample.
Its length always equals the data dimension.

License: BSD 3-Clause
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from pkg.conditioning.network import FeaturePyramid
from pkg.errors import ConfigurationError, ShapeError
from pkg.numerics.layers import Module
from pkg.numerics.rng import RngStreams
from pkg.numerics.tensor import Tensor, as_tensor, concat, reshape, split, tensor_sum

from .architecture import ArchitectureSpec, DOWNSAMPLE_TYPES
from .stages import (CouplingStage, DownsampleStage, FlattenStage, PermutationStage,
                     SplitStage, Stage)

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class DensityEval:
    """Result of a forward pass: latent code, log|det J| and log q(x | y)."""
    z: Tensor
    logdet: Tensor
    log_q: Tensor


def permutation_seed(arch_seed: int, stage_index: int) -> int:
    """Seed of the permutation at ``stage_index``; distinct per stage."""
    state = RngStreams(arch_seed).seed_sequence('permutation', stage_index).generate_state(1)
    return int(state[0])


class FlowModel(Module):
    """
    The invertible part of a cINN.

    Args:
        spec: Architecture description
        condition_shapes: Per-sample shape of each pyramid level, or None for
            an unconditional flow
        rng: Generator for coupling weights (defaults to the spec's init stream)

    Raises:
        ConfigurationError: If stages do not fit together, a coupling has no
            pyramid level, or dim(z) != dim(x)
    """

    def __init__(self, spec: ArchitectureSpec,
                 condition_shapes: Optional[Sequence[Sequence[int]]] = None,
                 rng: Optional[np.random.Generator] = None):
        super().__init__()
        self.input_shape = spec.input_shape
        self.dim = int(np.prod(spec.input_shape))
        rng = rng if rng is not None else RngStreams(spec.seed).generator('init', 1)
        shapes = None if condition_shapes is None else [tuple(s) for s in condition_shapes]

        self.stages: List[Stage] = []
        self.split_shapes: List[Tuple[int, ...]] = []
        shape = spec.input_shape
        level = 0
        for i, entry in enumerate(spec.stages):
            kind = entry['type']
            try:
                if kind == 'coupling':
                    if shapes is not None and level >= len(shapes):
                        raise ConfigurationError(
                            f"coupling at level {level} but the pyramid has {len(shapes)} levels")
                    stage: Stage = CouplingStage(
                        shape, level, shapes[level] if shapes is not None else None, rng,
                        hidden=spec.subnet_hidden, clamp=spec.clamp,
                        gamma_init=spec.gamma_init, batch_norm=spec.batch_norm)
                elif kind == 'permute':
                    stage = PermutationStage(shape, permutation_seed(spec.seed, i))
                elif kind in DOWNSAMPLE_TYPES:
                    stage = DownsampleStage(shape, kind)
                    level += 1
                elif kind == 'split':
                    stage = SplitStage(shape)
                    self.split_shapes.append(stage.split_shape)
                else:
                    stage = FlattenStage(shape)
            except ConfigurationError as exc:
                raise ConfigurationError(f"stage {i} ({kind}): {exc}") from None
            self.stages.append(stage)
            shape = stage.output_shape
        self.output_shape = shape

        latent = sum(int(np.prod(s)) for s in self.split_shapes) + int(np.prod(shape))
        if latent != self.dim:
            raise ConfigurationError(f"latent dimension {latent} != data dimension {self.dim}")
        self.latent_sizes = [int(np.prod(s)) for s in self.split_shapes] + [int(np.prod(shape))]
        logger.debug(f"Flow assembled: {len(self.stages)} stages, output {self.output_shape}, "
                     f"{len(self.split_shapes)} split(s)")

    @property
    def num_couplings(self) -> int:
        return sum(1 for s in self.stages if isinstance(s, CouplingStage))

    def forward(self, x, pyramid: Optional[FeaturePyramid] = None) -> DensityEval:
        """
        Map data to latent space.

        Raises:
            ShapeError: If x is not (N,) + input_shape
            NumericError: If any intermediate value is non-finite
        """
        x = as_tensor(x)
        if tuple(x.shape[1:]) != self.input_shape:
            raise ShapeError("flow input does not match the architecture",
                             (x.shape[0],) + self.input_shape, x.shape)
        n = x.shape[0]
        if pyramid is not None and pyramid.batch_size != n:
            raise ShapeError("condition batch differs from data batch",
                             (n,), (pyramid.batch_size,))
        logdet = Tensor(np.zeros(n))
        pieces: List[Tensor] = []
        h = x
        for stage in self.stages:
            h, stage_logdet, split_off = stage.forward(h, pyramid)
            if stage_logdet is not None:
                logdet = logdet + stage_logdet
            if split_off is not None:
                pieces.append(reshape(split_off, (n, -1)))
        pieces.append(reshape(h, (n, -1)))
        z = concat(pieces, axis=1) if len(pieces) > 1 else pieces[0]
        log_q = -0.5 * tensor_sum(z * z, axis=1) - 0.5 * self.dim * LOG_2PI + logdet
        return DensityEval(z=z, logdet=logdet, log_q=log_q)

    def inverse(self, z, pyramid: Optional[FeaturePyramid] = None) -> Tensor:
        """
        Map latent codes back to data.

        Raises:
            ShapeError: If z is not (N, dim)
        """
        z = as_tensor(z)
        if z.ndim != 2 or z.shape[1] != self.dim:
            raise ShapeError(f"latent codes must be (N, {self.dim})", z.shape)
        n = z.shape[0]
        if pyramid is not None and pyramid.batch_size != n:
            raise ShapeError("condition batch differs from latent batch",
                             (n,), (pyramid.batch_size,))
        pieces = split(z, self.latent_sizes, axis=1) if len(self.latent_sizes) > 1 else [z]
        h = reshape(pieces[-1], (n,) + self.output_shape)
        remaining = list(zip(pieces[:-1], self.split_shapes))
        for stage in reversed(self.stages):
            split_off = None
            if isinstance(stage, SplitStage):
                piece, piece_shape = remaining.pop()
                split_off = reshape(piece, (n,) + piece_shape)
            h = stage.inverse(h, pyramid, split_off)
        return h


def forward(x, pyramid: Optional[FeaturePyramid], model: FlowModel) -> DensityEval:
    return model.forward(x, pyramid)


def inverse(z, pyramid: Optional[FeaturePyramid], model: FlowModel) -> Tensor:
    return model.inverse(z, pyramid)
