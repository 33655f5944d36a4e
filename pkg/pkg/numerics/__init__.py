"""
cINN Numerics Package
---------------------
Tensor arithmetic with reverse-mode autodiff, layers, Adam and seeded streams.

License: BSD 3-Clause
"""

from .tensor import (
    Tensor,
    Parameter,
    as_tensor,
    add,
    sub,
    mul,
    div,
    neg,
    exp,
    log,
    tanh,
    relu,
    tensor_sum,
    mean,
    matmul,
    reshape,
    transpose,
    broadcast_to,
    concat,
    index,
    take,
    split,
    conv2d,
    batch_normalize,
    backward,
    no_grad,
    is_grad_enabled,
)
from .layers import Module, Linear, Conv2d, BatchNorm, ReLU, Sequential
from .optim import Adam, AdamState, adam_step, MultiStepSchedule
from .rng import RngStreams

__all__ = [
    'Tensor', 'Parameter', 'as_tensor',
    'add', 'sub', 'mul', 'div', 'neg', 'exp', 'log', 'tanh', 'relu',
    'tensor_sum', 'mean', 'matmul', 'reshape', 'transpose', 'broadcast_to',
    'concat', 'index', 'take', 'split', 'conv2d', 'batch_normalize',
    'backward', 'no_grad', 'is_grad_enabled',
    'Module', 'Linear', 'Conv2d', 'BatchNorm', 'ReLU', 'Sequential',
    'Adam', 'AdamState', 'adam_step', 'MultiStepSchedule',
    'RngStreams',
]
