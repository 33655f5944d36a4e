#!/usr/bin/env python3
"""
cINN Training - Batches
-----------------------
Dequantisation noise and the batch loader.

Every step's batch is a pure function of (seed, step): indices come from
the ``batch`` stream and noise from the ``noise`` stream, both keyed by the
step number. Worker threads are assigned steps in lanes (worker i builds
steps i, i + W, i + 2W, ...) and each lane has its own queue, so the
training loop reads batches in step order no matter how the threads are
scheduled.

License: BSD 3-Clause
"""

import logging
import queue
import threading
from dataclasses import dataclass
from typing import Iterator, List, Optional

import numpy as np

from pkg.datasets.tasks import Dataset
from pkg.errors import ContractViolation
from pkg.numerics.rng import RngStreams

logger = logging.getLogger(__name__)


def dequantize(x, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """
    Add N(0, sigma^2) noise to x; sigma = 0 returns x unchanged.

    Raises:
        ContractViolation: If sigma is negative
    """
    if sigma < 0:
        raise ContractViolation(f"noise sigma must be non-negative, got {sigma}")
    x = np.array(x.numpy() if hasattr(x, 'numpy') else x, dtype=np.float64)
    if sigma == 0:
        return x
    return x + sigma * rng.standard_normal(x.shape)


@dataclass
class Batch:
    step: int
    x: np.ndarray
    y: np.ndarray


def make_batch(dataset: Dataset, step: int, batch_size: int, seed: int,
               noise_sigma: float) -> Batch:
    """The batch for ``step``; identical for identical arguments."""
    streams = RngStreams(seed)
    rng = streams.generator('batch', step)
    n = len(dataset)
    if batch_size <= n:
        indices = rng.permutation(n)[:batch_size]
    else:
        indices = rng.integers(0, n, size=batch_size)
    x = dequantize(dataset.x[indices], noise_sigma, streams.generator('noise', step))
    return Batch(step, x, dataset.y[indices].astype(np.float64))


class BatchWorker(threading.Thread):
    """Builds the batches of one lane and queues them in step order."""

    def __init__(self, loader: 'BatchLoader', lane_id: int, num_lanes: int):
        super().__init__()
        self.daemon = True
        self.loader = loader
        self.lane_id = lane_id
        self.num_lanes = num_lanes
        self.queue: 'queue.Queue[Batch]' = queue.Queue(maxsize=loader.prefetch)
        self.running = True

    def run(self):
        loader = self.loader
        for step in range(loader.start + self.lane_id, loader.stop, self.num_lanes):
            batch = make_batch(loader.dataset, step, loader.batch_size,
                               loader.seed, loader.noise_sigma)
            while self.running:
                try:
                    self.queue.put(batch, timeout=0.1)
                    break
                except queue.Full:
                    continue
            if not self.running:
                return


class BatchLoader:
    """
    Iterates the batches of steps ``start .. stop - 1``.

    Args:
        dataset: Training data
        batch_size: Rows per batch
        seed: Run seed
        noise_sigma: Dequantisation noise (0 disables it)
        num_workers: 0 builds batches in the calling thread
        start: First step
        stop: One past the last step
        prefetch: Queue depth per worker
    """

    def __init__(self, dataset: Dataset, batch_size: int, seed: int, noise_sigma: float,
                 num_workers: int = 0, start: int = 0, stop: int = 1, prefetch: int = 2):
        self.dataset = dataset
        self.batch_size = batch_size
        self.seed = seed
        self.noise_sigma = noise_sigma
        self.num_workers = num_workers
        self.start = start
        self.stop = stop
        self.prefetch = max(1, prefetch)
        self.workers: List[BatchWorker] = []

    def __iter__(self) -> Iterator[Batch]:
        if self.num_workers == 0:
            for step in range(self.start, self.stop):
                yield make_batch(self.dataset, step, self.batch_size, self.seed, self.noise_sigma)
            return
        self.workers = [BatchWorker(self, i, self.num_workers) for i in range(self.num_workers)]
        for worker in self.workers:
            worker.start()
        logger.debug(f"Started {self.num_workers} batch workers for steps {self.start}..{self.stop - 1}")
        try:
            for step in range(self.start, self.stop):
                yield self.workers[(step - self.start) % self.num_workers].queue.get()
        finally:
            self.close()

    def close(self) -> None:
        for worker in self.workers:
            worker.running = False
        for worker in self.workers:
            worker.join(timeout=2)
        self.workers = []
