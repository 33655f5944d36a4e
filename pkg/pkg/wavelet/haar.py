#!/usr/bin/env python3
"""
cINN Wavelet - Haar Downsampling
--------------------------------
Invertible 2x2 Haar transform: halves the resolution, quadruples the channels
and separates the average from horizontal, vertical and diagonal detail.

The kernel is orthonormal (entries +-1/2), so the transform has |det| = 1 and
adds nothing to the log-Jacobian. Output channels are grouped by coefficient:
all average channels first, then all horizontal, vertical and diagonal ones.

The naive space-to-depth reshape (``squeeze_down``) uses the same grouping
with the identity kernel and is kept for the ablation runs.

License: BSD 3-Clause
"""

from typing import Tuple

import numpy as np

from pkg.errors import ShapeError
from pkg.numerics.tensor import ArrayLike, Tensor, as_tensor

# Rows: average, horizontal, vertical, diagonal.
# Columns: pixels (0,0), (0,1), (1,0), (1,1) of each 2x2 block.
HAAR_KERNEL = 0.5 * np.array([
    [1.0, 1.0, 1.0, 1.0],
    [1.0, -1.0, 1.0, -1.0],
    [1.0, 1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0, 1.0],
])
HAAR_KERNEL.setflags(write=False)

SQUEEZE_KERNEL = np.eye(4)
SQUEEZE_KERNEL.setflags(write=False)

COEFFICIENT_NAMES = ('average', 'horizontal', 'vertical', 'diagonal')


def kernel_orthogonality_error(kernel: np.ndarray = HAAR_KERNEL) -> float:
    """Max-norm distance of K K^T from the identity."""
    return float(np.abs(kernel @ kernel.T - np.eye(4)).max())


def _batched(x: np.ndarray) -> Tuple[np.ndarray, bool]:
    if x.ndim == 3:
        return x[None], True
    if x.ndim != 4:
        raise ShapeError("expected (C, H, W) or (N, C, H, W)", x.shape)
    return x, False


def _down_array(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError("downsampling needs even spatial dimensions", x.shape)
    blocks = (x.reshape(n, c, h // 2, 2, w // 2, 2)
               .transpose(0, 1, 2, 4, 3, 5)
               .reshape(n, c, h // 2, w // 2, 4))
    coeffs = blocks @ kernel.T
    return coeffs.transpose(0, 4, 1, 2, 3).reshape(n, 4 * c, h // 2, w // 2)


def _up_array(y: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    n, c4, h, w = y.shape
    if c4 % 4:
        raise ShapeError("upsampling needs a channel count divisible by 4", y.shape)
    c = c4 // 4
    coeffs = y.reshape(n, 4, c, h, w).transpose(0, 2, 3, 4, 1)
    blocks = coeffs @ kernel
    return (blocks.reshape(n, c, h, w, 2, 2)
                  .transpose(0, 1, 2, 4, 3, 5)
                  .reshape(n, c, 2 * h, 2 * w))


def _orthogonal_op(x: ArrayLike, kernel: np.ndarray, down: bool, op: str) -> Tensor:
    x = as_tensor(x)
    data, single = _batched(x.data)
    forward_fn, adjoint_fn = (_down_array, _up_array) if down else (_up_array, _down_array)
    out = forward_fn(data, kernel)
    if single:
        out = out[0]

    def backward(g):
        g_batched, _ = _batched(g)
        grad = adjoint_fn(g_batched, kernel)
        return (grad[0] if single else grad,)
    return Tensor._from_op(out, (x,), backward, op)


def haar_down(x: ArrayLike) -> Tensor:
    """
    Haar wavelet downsampling, (C, H, W) -> (4C, H/2, W/2), batched or not.

    Raises:
        ShapeError: If H or W is odd
    """
    return _orthogonal_op(x, HAAR_KERNEL, True, 'haar_down')


def haar_up(x: ArrayLike) -> Tensor:
    """
    Exact inverse of ``haar_down``, (4C, H, W) -> (C, 2H, 2W).

    Raises:
        ShapeError: If the channel count is not divisible by 4
    """
    return _orthogonal_op(x, HAAR_KERNEL, False, 'haar_up')


def squeeze_down(x: ArrayLike) -> Tensor:
    """Naive space-to-depth reshape with the same channel grouping as Haar."""
    return _orthogonal_op(x, SQUEEZE_KERNEL, True, 'squeeze_down')


def squeeze_up(x: ArrayLike) -> Tensor:
    return _orthogonal_op(x, SQUEEZE_KERNEL, False, 'squeeze_up')
