#!/usr/bin/env python3
"""
Posterior sampling: z ~ N(0, T^2 I) pushed through the inverse flow.

License: BSD 3-Clause
"""

import logging

import numpy as np

from pkg.errors import ContractViolation, ShapeError
from pkg.numerics.rng import RngStreams
from pkg.numerics.tensor import Tensor

from .cinn import CINN, inference

logger = logging.getLogger(__name__)


def repeat_condition(y, n: int, condition_shape) -> np.ndarray:
    """Tile one condition (per-sample shape or a batch of one) to n rows."""
    y = np.asarray(y.numpy() if isinstance(y, Tensor) else y, dtype=np.float64)
    condition_shape = tuple(condition_shape)
    if y.shape == condition_shape:
        y = y[None]
    elif condition_shape == (1,) and y.ndim == 0:
        y = y.reshape(1, 1)
    if y.shape[1:] != condition_shape or y.shape[0] != 1:
        raise ShapeError("expected a single condition", condition_shape, y.shape)
    return np.repeat(y, n, axis=0)


def sample(y, n: int, temperature: float, model: CINN, seed: int = 0) -> Tensor:
    """
    Draw n samples from q(x | y).

    Args:
        y: A single condition
        n: Number of samples
        temperature: Latent standard deviation T; 0 gives the mode x(z=0)
        model: Trained cINN (run in eval mode)
        seed: Seed of the ``sampling`` stream

    Returns:
        Tensor of shape (n,) + input_shape

    Raises:
        ContractViolation: If n < 1 or temperature < 0
    """
    if n < 1:
        raise ContractViolation(f"sample count must be positive, got {n}")
    if temperature < 0:
        raise ContractViolation(f"temperature must be non-negative, got {temperature}")
    ys = repeat_condition(y, n, model.spec.condition_shape)
    rng = RngStreams(seed).generator('sampling')
    z = rng.standard_normal((n, model.dim)) * temperature
    with inference(model):
        x = model.inverse(z, ys)
    logger.debug(f"Drew {n} samples at temperature {temperature}")
    return x
