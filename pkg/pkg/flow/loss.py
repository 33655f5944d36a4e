#!/usr/bin/env python3
"""
cINN Flow - Maximum-Likelihood Loss
-----------------------------------
Conditional maximum likelihood: the batch mean of ||z||^2 / 2 - log|det J|.
Adding the constant d/2 * ln(2 pi) and dividing by d gives the negative
log-likelihood in nats per dimension.

License: BSD 3-Clause
"""

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from pkg.errors import NumericError
from pkg.numerics.tensor import Tensor, mean, tensor_sum

from .cinn import CINN
from .model import DensityEval

LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class LossValue:
    """
    The loss tensor to differentiate plus its reported values.

    Attributes:
        loss: Scalar tensor still attached to the graph
        cml: Batch mean of ||z||^2/2 - logdet
        nll_nats_per_dim: (cml + d/2 ln 2pi) / d
    """
    loss: Tensor
    cml: float
    nll_nats_per_dim: float

    @property
    def nll_bits_per_dim(self) -> float:
        return self.nll_nats_per_dim / math.log(2.0)


def nll_per_dim(cml: Union[float, np.ndarray], dim: int) -> Union[float, np.ndarray]:
    return (cml + 0.5 * dim * LOG_2PI) / dim


def cml_from_density(density: DensityEval) -> LossValue:
    """
    Reduce a DensityEval to the training loss.

    Raises:
        NumericError: Naming the first sample whose loss is not finite
    """
    z = density.z
    per_sample = 0.5 * tensor_sum(z * z, axis=1) - density.logdet
    values = per_sample.numpy()
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise NumericError("non-finite per-sample loss", sample_index=int(bad[0]))
    loss = mean(per_sample)
    cml = loss.item()
    return LossValue(loss=loss, cml=cml, nll_nats_per_dim=float(nll_per_dim(cml, z.shape[1])))


def cml_loss(x, y, model: CINN) -> LossValue:
    """Loss of one batch (x, y) under ``model``."""
    return cml_from_density(model.forward(x, y))
