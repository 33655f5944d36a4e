#!/usr/bin/env python3
"""
Named random streams derived from one seed.

Each subsystem (data, init, sampling, noise, ...) draws from its own
generator so it can be reproduced without replaying the others.

License: BSD 3-Clause
"""

import hashlib

import numpy as np


class RngStreams:
    """Splits a single integer seed into independent named generators."""

    def __init__(self, seed: int):
        self.seed = int(seed)

    def seed_sequence(self, name: str, *keys: int) -> np.random.SeedSequence:
        digest = hashlib.sha256(name.encode('utf-8')).digest()
        stream_key = int.from_bytes(digest[:8], 'little')
        return np.random.SeedSequence(entropy=self.seed,
                                      spawn_key=(stream_key,) + tuple(int(k) for k in keys))

    def generator(self, name: str, *keys: int) -> np.random.Generator:
        """Fresh generator for ``name`` (and optional integer sub-keys)."""
        return np.random.Generator(np.random.PCG64(self.seed_sequence(name, *keys)))
