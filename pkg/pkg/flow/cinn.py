#!/usr/bin/env python3
"""
cINN Flow - Conditional INN
---------------------------
Pairs a FlowModel with its conditioning network. Raw conditions y go through
the conditioning network once per call; the resulting pyramid feeds every
coupling block.

License: BSD 3-Clause
"""

import logging
from contextlib import contextmanager
from typing import Iterator

import numpy as np

from pkg.conditioning.network import (ConditioningNetwork, FeaturePyramid,
                                      build_conditioning)
from pkg.errors import ConfigurationError
from pkg.numerics.layers import Module
from pkg.numerics.rng import RngStreams
from pkg.numerics.tensor import Tensor, no_grad

from .architecture import ArchitectureSpec
from .model import DensityEval, FlowModel

logger = logging.getLogger(__name__)


class CINN(Module):
    """
    Conditional invertible network built from an ArchitectureSpec.

    Initial weights come from the ``init`` stream of ``spec.seed``, so the
    same spec always produces the same model.
    """

    def __init__(self, spec: ArchitectureSpec):
        super().__init__()
        self.spec = spec
        streams = RngStreams(spec.seed)
        self.conditioning: ConditioningNetwork = build_conditioning(
            spec.conditioning, spec.condition_shape, spec.cond_widths,
            streams.generator('init', 0), hidden=spec.cond_hidden,
            zero_init_heads=spec.zero_init_heads)
        cond_shapes = self.conditioning.output_shapes()
        if len(cond_shapes) != spec.num_levels:
            raise ConfigurationError(
                f"conditioning yields {len(cond_shapes)} levels, flow has {spec.num_levels}")
        self.flow = FlowModel(spec, cond_shapes, streams.generator('init', 1))
        self.assign_names()
        logger.info(f"cINN assembled: input {spec.input_shape}, condition {spec.condition_shape}, "
                    f"{self.flow.num_couplings} coupling blocks, "
                    f"{sum(p.size for p in self.parameters())} parameters")

    @property
    def dim(self) -> int:
        return self.flow.dim

    def pyramid(self, y) -> FeaturePyramid:
        return self.conditioning(y)

    def forward(self, x, y) -> DensityEval:
        return self.flow.forward(x, self.pyramid(y))

    def inverse(self, z, y) -> Tensor:
        return self.flow.inverse(z, self.pyramid(y))

    def log_prob(self, x, y) -> np.ndarray:
        """log q(x | y) per sample, in nats, without building a graph."""
        with no_grad():
            return self.forward(x, y).log_q.numpy().copy()


@contextmanager
def inference(model: Module) -> Iterator[Module]:
    """Eval mode and no graph inside the block; the previous mode is restored."""
    was_training = model.training
    model.eval()
    try:
        with no_grad():
            yield model
    finally:
        model.train(was_training)
