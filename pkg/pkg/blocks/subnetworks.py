#!/usr/bin/env python3
"""
cINN Blocks - Subnetworks
-------------------------
Unconstrained feed-forward networks that emit the affine coefficients of a
coupling block. They are only ever evaluated forwards, in both directions of
the flow, so any architecture works.

The final layer starts at zero, which makes every coupling block start as the
identity map.

License: BSD 3-Clause
"""

import numpy as np

from pkg.numerics.layers import BatchNorm, Conv2d, Linear, Module, ReLU, Sequential
from pkg.numerics.tensor import Tensor


class DenseSubnetwork(Module):
    """Three fully connected layers with ReLU after the first two."""

    def __init__(self, in_features: int, out_features: int, hidden: int,
                 rng: np.random.Generator):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        self.net = Sequential(
            Linear(in_features, hidden, rng),
            ReLU(),
            Linear(hidden, hidden, rng),
            ReLU(),
            Linear(hidden, out_features, rng, zero_init=True),
        )

    def forward(self, x: Tensor) -> Tensor:
        return self.net(x)


class ConvSubnetwork(Module):
    """
    Three 3x3 convolutions with ReLU activations and batch normalisation
    after the first two.
    """

    def __init__(self, in_channels: int, out_channels: int, hidden: int,
                 rng: np.random.Generator, batch_norm: bool = True):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        layers = [Conv2d(in_channels, hidden, 3, rng), ReLU()]
        if batch_norm:
            layers.append(BatchNorm(hidden))
        layers += [Conv2d(hidden, hidden, 3, rng), ReLU()]
        if batch_norm:
            layers.append(BatchNorm(hidden))
        layers.append(Conv2d(hidden, out_channels, 3, rng, zero_init=True))
        self.net = Sequential(*layers)

    def forward(self, x: Tensor) -> Tensor:
        return self.net(x)
