#!/usr/bin/env python3
"""
cINN Numerics - Layers
----------------------
Minimal module system on top of the autodiff tensor: named parameters,
non-trainable buffers (batch-norm running statistics, permutation tables),
and train/eval modes.

License: BSD 3-Clause
"""

from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from pkg.errors import ConfigurationError, ShapeError
from .tensor import (Parameter, Tensor, as_tensor, batch_normalize, conv2d,
                     matmul, relu)


class Module:
    """
    Base class for anything holding parameters.

    Child modules are discovered from instance attributes (directly or inside
    lists), in attribute definition order, so parameter paths are stable.
    Subclasses list array attributes that belong in a checkpoint but are not
    trained in ``buffer_names``.
    """

    buffer_names: Tuple[str, ...] = ()

    def __init__(self):
        self.training = True

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def named_children(self) -> Iterator[Tuple[str, 'Module']]:
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield name, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield f"{name}.{i}", item

    def named_parameters(self, prefix: str = '') -> Iterator[Tuple[str, Parameter]]:
        for name, value in vars(self).items():
            if isinstance(value, Parameter):
                yield f"{prefix}{name}", value
        for name, child in self.named_children():
            yield from child.named_parameters(f"{prefix}{name}.")

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix: str = '') -> Iterator[Tuple[str, np.ndarray]]:
        for name in self.buffer_names:
            yield f"{prefix}{name}", getattr(self, name)
        for name, child in self.named_children():
            yield from child.named_buffers(f"{prefix}{name}.")

    def assign_names(self, prefix: str = '') -> None:
        """Stamp every parameter with its dotted path."""
        for name, param in self.named_parameters(prefix):
            param.name = name

    def train(self, mode: bool = True) -> 'Module':
        self.training = mode
        for _, child in self.named_children():
            child.train(mode)
        return self

    def eval(self) -> 'Module':
        return self.train(False)

    def state_dict(self) -> Dict[str, np.ndarray]:
        state = {name: p.data.copy() for name, p in self.named_parameters()}
        for name, buf in self.named_buffers():
            state[name] = np.array(buf, dtype=np.float64)
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        """
        Load parameters and buffers by name.

        Raises:
            ConfigurationError: If names are missing or unexpected
            ShapeError: If a stored array has the wrong shape
        """
        params = dict(self.named_parameters())
        buffers = dict(self.named_buffers())
        expected = set(params) | set(buffers)
        missing = sorted(expected - set(state))
        unexpected = sorted(set(state) - expected)
        if missing or unexpected:
            raise ConfigurationError(
                f"state mismatch: missing={missing[:5]} unexpected={unexpected[:5]}")
        for name, param in params.items():
            param.assign(state[name])
        for name in buffers:
            owner, attr = self._resolve(name)
            current = getattr(owner, attr)
            values = np.asarray(state[name])
            if values.shape != np.shape(current):
                raise ShapeError(f"buffer '{name}' has the wrong shape", np.shape(current), values.shape)
            setattr(owner, attr, values.astype(np.asarray(current).dtype))

    def _resolve(self, dotted: str) -> Tuple['Module', str]:
        parts = dotted.split('.')
        owner: Module = self
        i = 0
        while i < len(parts) - 1:
            value = getattr(owner, parts[i])
            if isinstance(value, (list, tuple)):
                value = value[int(parts[i + 1])]
                i += 1
            owner = value
            i += 1
        return owner, parts[-1]


def he_normal(rng: np.random.Generator, shape: Sequence[int], fan_in: int) -> np.ndarray:
    if fan_in <= 0:
        return np.zeros(shape)
    return rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)


class Linear(Module):
    """Fully connected layer, ``y = x W + b``."""

    def __init__(self, in_features: int, out_features: int,
                 rng: np.random.Generator, zero_init: bool = False):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        shape = (in_features, out_features)
        self.weight = Parameter(np.zeros(shape) if zero_init else he_normal(rng, shape, in_features))
        self.bias = Parameter(np.zeros(out_features))

    def forward(self, x: Tensor) -> Tensor:
        x = as_tensor(x)
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeError(f"Linear expects (N, {self.in_features}) input", x.shape)
        return matmul(x, self.weight) + self.bias


class Conv2d(Module):
    """Square-kernel convolution with 'same' padding by default."""

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 rng: np.random.Generator, stride: int = 1,
                 padding: Optional[int] = None, zero_init: bool = False):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.stride = stride
        self.padding = kernel_size // 2 if padding is None else padding
        shape = (out_channels, in_channels, kernel_size, kernel_size)
        fan_in = in_channels * kernel_size * kernel_size
        self.weight = Parameter(np.zeros(shape) if zero_init else he_normal(rng, shape, fan_in))
        self.bias = Parameter(np.zeros(out_channels))

    def forward(self, x: Tensor) -> Tensor:
        return conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class BatchNorm(Module):
    """
    Batch normalisation over every axis except channels.

    Training mode normalises with batch statistics and updates the running
    estimates; eval mode uses the running estimates, which are checkpointed.
    """

    buffer_names = ('running_mean', 'running_var')

    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.weight = Parameter(np.ones(channels))
        self.bias = Parameter(np.zeros(channels))
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)

    def forward(self, x: Tensor) -> Tensor:
        x = as_tensor(x)
        if x.ndim < 2 or x.shape[1] != self.channels:
            raise ShapeError(f"BatchNorm expects {self.channels} channels", x.shape)
        bshape = (1, self.channels) + (1,) * (x.ndim - 2)
        count = x.size // self.channels
        if self.training and count > 1:
            xhat, batch_mean, batch_var = batch_normalize(x, self.eps)
            unbiased = batch_var * count / (count - 1)
            self.running_mean = (1 - self.momentum) * self.running_mean + self.momentum * batch_mean
            self.running_var = (1 - self.momentum) * self.running_var + self.momentum * unbiased
        else:
            shift = Tensor(self.running_mean.reshape(bshape))
            scale = Tensor((1.0 / np.sqrt(self.running_var + self.eps)).reshape(bshape))
            xhat = (x - shift) * scale
        return xhat * self.weight.reshape(bshape) + self.bias.reshape(bshape)


class ReLU(Module):
    def forward(self, x: Tensor) -> Tensor:
        return relu(x)


class Sequential(Module):
    def __init__(self, *layers: Module):
        super().__init__()
        self.layers = list(layers)

    def forward(self, x: Tensor) -> Tensor:
        for layer in self.layers:
            x = layer(x)
        return x
