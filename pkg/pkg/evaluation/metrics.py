#!/usr/bin/env python3
"""
cINN Evaluation - Metrics
-------------------------
Sample-quality and likelihood metrics:

- best_of_n: minimum over samples of the mean squared error to the truth
- pixel_variance: per-pixel variance across samples, averaged over pixels
- mode_frequencies: fraction of samples assigned to each mixture mode
- evaluate_nll: test negative log-likelihood in nats per dimension
- sample_quality: best-of-N MSE and diversity averaged over a dataset

License: BSD 3-Clause
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from pkg.datasets.tasks import Dataset
from pkg.errors import ContractViolation, ShapeError
from pkg.flow.cinn import CINN, inference
from pkg.flow.sampling import sample
from pkg.numerics.rng import RngStreams
from pkg.training.data import dequantize

logger = logging.getLogger(__name__)


def _values(x) -> np.ndarray:
    return np.asarray(x.numpy() if hasattr(x, 'numpy') else x, dtype=np.float64)


def best_of_n(samples, truth) -> float:
    """
    min_i mean((samples[i] - truth)^2).

    Raises:
        ContractViolation: If there are no samples
        ShapeError: If a sample's shape differs from the truth
    """
    samples, truth = _values(samples), _values(truth)
    if samples.ndim == 0 or len(samples) < 1:
        raise ContractViolation("best_of_n needs at least one sample")
    if samples.shape[1:] != truth.shape:
        raise ShapeError("samples and truth differ in shape", samples.shape[1:], truth.shape)
    errors = ((samples - truth[None]) ** 2).reshape(len(samples), -1).mean(axis=1)
    return float(errors.min())


def pixel_variance(samples) -> float:
    """Population variance across samples, averaged over every pixel."""
    samples = _values(samples)
    if samples.ndim == 0 or len(samples) < 1:
        raise ContractViolation("pixel_variance needs at least one sample")
    return float(samples.var(axis=0).mean())


def mode_frequencies(assignments, num_modes: int) -> np.ndarray:
    """Fraction of assignments per mode; sums to 1."""
    assignments = np.asarray(assignments, dtype=np.int64).reshape(-1)
    if assignments.size == 0:
        raise ContractViolation("mode_frequencies needs at least one assignment")
    if assignments.min() < 0 or assignments.max() >= num_modes:
        raise ContractViolation(f"mode index outside 0..{num_modes - 1}")
    counts = np.bincount(assignments, minlength=num_modes)
    return counts / counts.sum()


def evaluate_nll(model: CINN, dataset: Dataset, batch_size: int = 256,
                 noise_sigma: float = 0.0, seed: int = 0) -> float:
    """
    Mean negative log-likelihood in nats per dimension.

    Noise, if any, comes from the ``eval-noise`` stream of ``seed`` so every
    model sees the same perturbed test set.
    """
    streams = RngStreams(seed)
    total = 0.0
    with inference(model):
        for start in range(0, len(dataset), batch_size):
            chunk = dataset.subset(slice(start, start + batch_size))
            x = dequantize(chunk.x, noise_sigma, streams.generator('eval-noise', start))
            total += float(-model.forward(x, chunk.y).log_q.numpy().sum())
    return total / len(dataset) / model.dim


@dataclass
class SampleQuality:
    best_of_n_mse: float
    variance: float
    images: int


def sample_quality(model: CINN, dataset: Dataset, n: int = 8, temperature: float = 1.0,
                   seed: int = 0, limit: Optional[int] = None) -> SampleQuality:
    """Best-of-n MSE and pixel variance of n samples per condition, averaged."""
    count = len(dataset) if limit is None else min(limit, len(dataset))
    mses, variances = [], []
    for i in range(count):
        drawn = sample(dataset.y[i], n, temperature, model, seed=seed + i).numpy()
        mses.append(best_of_n(drawn, dataset.x[i]))
        variances.append(pixel_variance(drawn))
    logger.info(f"Sample quality over {count} conditions: best-of-{n} MSE {np.mean(mses):.4f}, "
                f"variance {np.mean(variances):.4f}")
    return SampleQuality(float(np.mean(mses)), float(np.mean(variances)), count)
