#!/usr/bin/env python3
"""
cINN Blocks - Conditional Coupling Block
----------------------------------------
Affine coupling with a condition fed to both subnetworks:

    v1 = u1 * exp(s1(u2, c)) + t1(u2, c)
    v2 = u2 * exp(s2(v1, c)) + t2(v1, c)

and the inverse

    u2 = (v2 - t2(v1, c)) * exp(-s2(v1, c))
    u1 = (v1 - t1(u2, c)) * exp(-s1(u2, c))

The log-determinant is the per-sample sum of s1 and s2. Scales are soft-clamped
as s = gamma * tanh(r) with a learned per-channel gamma.

License: BSD 3-Clause
"""

from typing import Optional, Sequence, Tuple

import numpy as np

from pkg.errors import ConditionShapeError, ConfigurationError, ShapeError
from pkg.numerics.layers import Module
from pkg.numerics.tensor import (Parameter, Tensor, as_tensor, concat, exp, split,
                                 tanh, tensor_sum)
from .subnetworks import ConvSubnetwork, DenseSubnetwork

DEFAULT_GAMMA = 0.1


class ClampedScale(Module):
    """
    Soft clamp ``s = gamma * tanh(r)`` with one learned gamma per channel.

    With ``enabled=False`` the scale is passed through (``s = r``), which is
    the unclamped ablation.
    """

    def __init__(self, channels: int, gamma_init: float = DEFAULT_GAMMA, enabled: bool = True):
        super().__init__()
        self.channels = channels
        self.enabled = enabled
        self.gamma = Parameter(np.full(channels, float(gamma_init)))

    def forward(self, r: Tensor) -> Tensor:
        if not self.enabled:
            return r
        shape = (1, self.channels) + (1,) * (r.ndim - 2)
        return self.gamma.reshape(shape) * tanh(r)


def per_sample_sum(x: Tensor) -> Tensor:
    """Sum over every axis except the batch axis."""
    if x.ndim == 1:
        return x
    return tensor_sum(x, axis=tuple(range(1, x.ndim)))


class ConditionalCouplingBlock(Module):
    """
    Conditional affine coupling block (CCB).

    Channels are split as evenly as possible, the first half taking the extra
    channel. A single-channel input leaves the second half empty, and the block
    reduces to a conditional affine map of the first half.

    Args:
        channels: Channel count of the input (features for dense blocks)
        condition_shape: Per-sample condition shape, () for none
        rng: Generator for weight initialisation
        kind: 'dense' for (N, D) inputs, 'conv' for (N, C, H, W)
        hidden: Subnetwork width
        clamp: Use the gamma*tanh soft clamp
        gamma_init: Initial gamma per channel
        batch_norm: Batch norm inside conv subnetworks
    """

    def __init__(self, channels: int, condition_shape: Sequence[int],
                 rng: np.random.Generator, kind: str = 'dense', hidden: int = 64,
                 clamp: bool = True, gamma_init: float = DEFAULT_GAMMA,
                 batch_norm: bool = True):
        super().__init__()
        if kind not in ('dense', 'conv'):
            raise ConfigurationError(f"Unknown coupling kind: {kind}")
        if channels < 1:
            raise ConfigurationError("Coupling block needs at least one channel")
        self.kind = kind
        self.channels = channels
        self.condition_shape = tuple(condition_shape)
        if kind == 'dense' and len(self.condition_shape) > 1:
            raise ConfigurationError(
                f"Dense coupling needs a flat condition, got {self.condition_shape}")
        if kind == 'conv' and self.condition_shape and len(self.condition_shape) != 3:
            raise ConfigurationError(
                f"Conv coupling needs a (C, H, W) condition, got {self.condition_shape}")
        cond_channels = self.condition_shape[0] if self.condition_shape else 0
        len1 = channels - channels // 2
        len2 = channels // 2
        self.split_sizes = (len1, len2)

        def subnet(in_ch: int, out_ch: int) -> Module:
            if kind == 'dense':
                return DenseSubnetwork(in_ch, out_ch, hidden, rng)
            return ConvSubnetwork(in_ch, out_ch, hidden, rng, batch_norm=batch_norm)

        self.subnet1 = subnet(len2 + cond_channels, 2 * len1)
        self.clamp1 = ClampedScale(len1, gamma_init, clamp)
        self.subnet2 = subnet(len1 + cond_channels, 2 * len2) if len2 else None
        self.clamp2 = ClampedScale(len2, gamma_init, clamp) if len2 else None

    # ------------------------------------------------------------------

    def _check(self, u: Tensor, c: Optional[Tensor]) -> None:
        expected_ndim = 2 if self.kind == 'dense' else 4
        if u.ndim != expected_ndim or u.shape[1] != self.channels:
            raise ShapeError(f"{self.kind} coupling expects {self.channels} channels", u.shape)
        if not self.condition_shape:
            if c is not None and c.size:
                raise ConditionShapeError("block is unconditional but a condition was given",
                                          (), c.shape)
            return
        if c is None:
            raise ConditionShapeError("condition required", self.condition_shape, ())
        if c.shape[1:] != self.condition_shape or c.shape[0] != u.shape[0]:
            raise ConditionShapeError("condition does not match block",
                                      (u.shape[0],) + self.condition_shape, c.shape)
        if self.kind == 'conv' and c.shape[2:] != u.shape[2:]:
            raise ConditionShapeError("condition resolution differs from input",
                                      u.shape, c.shape)

    def _coefficients(self, subnet: Module, clamp: ClampedScale, x: Tensor,
                      c: Optional[Tensor]) -> Tuple[Tensor, Tensor]:
        inputs = concat([x, c], axis=1) if self.condition_shape else x
        r, t = split(subnet(inputs), [clamp.channels, clamp.channels], axis=1)
        return clamp(r), t

    def scales(self, u: Tensor, c: Optional[Tensor] = None) -> Tuple[Tensor, Optional[Tensor]]:
        """The clamped scales (s1, s2) produced while mapping ``u`` forwards."""
        u = as_tensor(u)
        self._check(u, c)
        u1, u2 = split(u, self.split_sizes, axis=1)
        s1, t1 = self._coefficients(self.subnet1, self.clamp1, u2, c)
        if self.subnet2 is None:
            return s1, None
        v1 = u1 * exp(s1) + t1
        s2, _ = self._coefficients(self.subnet2, self.clamp2, v1, c)
        return s1, s2

    def forward(self, u: Tensor, c: Optional[Tensor] = None) -> Tuple[Tensor, Tensor]:
        """
        Map u -> v.

        Returns:
            Tuple of (v, per-sample log-determinant)
        """
        u = as_tensor(u)
        self._check(u, c)
        u1, u2 = split(u, self.split_sizes, axis=1)
        s1, t1 = self._coefficients(self.subnet1, self.clamp1, u2, c)
        v1 = u1 * exp(s1) + t1
        logdet = per_sample_sum(s1)
        if self.subnet2 is None:
            return v1, logdet
        s2, t2 = self._coefficients(self.subnet2, self.clamp2, v1, c)
        v2 = u2 * exp(s2) + t2
        return concat([v1, v2], axis=1), logdet + per_sample_sum(s2)

    def inverse(self, v: Tensor, c: Optional[Tensor] = None) -> Tuple[Tensor, Tensor]:
        """
        Map v -> u using forward evaluations of the subnetworks only.

        Returns:
            Tuple of (u, per-sample log-determinant of the inverse map)
        """
        v = as_tensor(v)
        self._check(v, c)
        v1, v2 = split(v, self.split_sizes, axis=1)
        if self.subnet2 is not None:
            s2, t2 = self._coefficients(self.subnet2, self.clamp2, v1, c)
            u2 = (v2 - t2) * exp(-s2)
            logdet = -per_sample_sum(s2)
        else:
            u2 = v2
            logdet = None
        s1, t1 = self._coefficients(self.subnet1, self.clamp1, u2, c)
        u1 = (v1 - t1) * exp(-s1)
        logdet = -per_sample_sum(s1) if logdet is None else logdet - per_sample_sum(s1)
        if self.subnet2 is None:
            return u1, logdet
        return concat([u1, u2], axis=1), logdet


def ccb_forward(u: Tensor, c: Optional[Tensor],
                block: ConditionalCouplingBlock) -> Tuple[Tensor, Tensor]:
    return block.forward(u, c)


def ccb_inverse(v: Tensor, c: Optional[Tensor],
                block: ConditionalCouplingBlock) -> Tuple[Tensor, Tensor]:
    return block.inverse(v, c)
