#!/usr/bin/env python3
"""
cINN Numerics - Tensor & Reverse-Mode Autodiff
-----------------------------------------------
Dense float64 tensors backed by numpy, with a dynamic tape.

Every operation records its parents and a backward rule on the result. The
graph is rebuilt on each call, so the same parameters can be used by the
forward and the inverse direction of a flow without any static bookkeeping.

Broadcasting follows numpy's rule (shapes right-aligned, each dimension equal
or 1) and nothing else. Shape violations raise ShapeError, non-finite results
raise NumericError.

License: BSD 3-Clause
"""

import threading
from contextlib import contextmanager
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from pkg.errors import ContractViolation, NumericError, ShapeError

ArrayLike = Union['Tensor', np.ndarray, float, int, Sequence]
BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]

_grad_state = threading.local()


def is_grad_enabled() -> bool:
    """Whether new operations are recorded on the tape (per thread)."""
    return getattr(_grad_state, 'enabled', True)


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording inside the block."""
    previous = is_grad_enabled()
    _grad_state.enabled = False
    try:
        yield
    finally:
        _grad_state.enabled = previous


def _check_finite(data: np.ndarray, op: str) -> None:
    if data.size and not np.isfinite(data).all():
        bad = np.argwhere(~np.isfinite(data))[0]
        sample = int(bad[0]) if data.ndim > 0 else None
        raise NumericError(f"{op} produced a non-finite value", sample_index=sample)


class Tensor:
    """
    Immutable float64 array with an optional autodiff record.

    Leaves created with ``requires_grad=True`` accumulate gradients in
    ``grad`` when ``backward`` runs; intermediate results never hold one.
    """

    __array_priority__ = 100

    def __init__(self, data: ArrayLike, requires_grad: bool = False):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.array(data, dtype=np.float64)
        arr.setflags(write=False)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self._parents: Tuple['Tensor', ...] = ()
        self._backward: Optional[BackwardFn] = None
        self._op = 'leaf'

    @classmethod
    def _from_op(cls, data: np.ndarray, parents: Sequence['Tensor'],
                 backward: BackwardFn, op: str) -> 'Tensor':
        arr = np.asarray(data, dtype=np.float64)
        _check_finite(arr, op)
        out = Tensor.__new__(Tensor)
        arr.setflags(write=False)
        out.data = arr
        out.grad = None
        out._op = op
        if is_grad_enabled() and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        else:
            out.requires_grad = False
            out._parents = ()
            out._backward = None
        return out

    # ------------------------------------------------------------------
    # Introspection
    # ------------------------------------------------------------------

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    def numpy(self) -> np.ndarray:
        """Read-only view of the values."""
        return self.data

    def item(self) -> float:
        if self.size != 1:
            raise ContractViolation(f"item() needs a single value, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> 'Tensor':
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __len__(self) -> int:
        return self.shape[0]

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self._op}{flag})"

    # ------------------------------------------------------------------
    # Operator sugar
    # ------------------------------------------------------------------

    def __add__(self, other): return add(self, other)
    def __radd__(self, other): return add(other, self)
    def __sub__(self, other): return sub(self, other)
    def __rsub__(self, other): return sub(other, self)
    def __mul__(self, other): return mul(self, other)
    def __rmul__(self, other): return mul(other, self)
    def __truediv__(self, other): return div(self, other)
    def __rtruediv__(self, other): return div(other, self)
    def __neg__(self): return neg(self)
    def __matmul__(self, other): return matmul(self, other)
    def __getitem__(self, key): return index(self, key)

    def sum(self, axis=None, keepdims: bool = False): return tensor_sum(self, axis, keepdims)
    def mean(self, axis=None, keepdims: bool = False): return mean(self, axis, keepdims)
    def reshape(self, *shape): return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], (tuple, list)) else shape)
    def transpose(self, *axes): return transpose(self, axes[0] if len(axes) == 1 and isinstance(axes[0], (tuple, list)) else (axes or None))
    def exp(self): return exp(self)
    def log(self): return log(self)
    def tanh(self): return tanh(self)
    def relu(self): return relu(self)


class Parameter(Tensor):
    """
    Named trainable tensor.

    Names are dotted paths assigned by the owning model and are the keys used
    by the optimizer and the checkpoint format.
    """

    def __init__(self, data: ArrayLike, name: str = '', trainable: bool = True):
        super().__init__(data, requires_grad=trainable)
        self.name = name
        self.trainable = trainable

    def assign(self, values: ArrayLike) -> None:
        """Replace the values in place of the optimizer or a checkpoint."""
        arr = np.array(values.data if isinstance(values, Tensor) else values, dtype=np.float64)
        if arr.shape != self.data.shape:
            raise ShapeError(f"cannot assign to parameter '{self.name}'", self.data.shape, arr.shape)
        arr.setflags(write=False)
        self.data = arr

    def freeze(self) -> None:
        self.trainable = False
        self.requires_grad = False
        self.grad = None

    def unfreeze(self) -> None:
        self.trainable = True
        self.requires_grad = True

    def __repr__(self) -> str:
        return f"Parameter(name={self.name!r}, shape={self.shape})"


def as_tensor(value: ArrayLike) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


# ============================================================================
# Broadcasting helpers
# ============================================================================

def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: operands do not broadcast", a.shape, b.shape) from None


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# ============================================================================
# Elementwise arithmetic
# ============================================================================

def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, 'add')

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)
    return Tensor._from_op(a.data + b.data, (a, b), backward, 'add')


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, 'sub')

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)
    return Tensor._from_op(a.data - b.data, (a, b), backward, 'sub')


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, 'mul')

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)
    return Tensor._from_op(a.data * b.data, (a, b), backward, 'mul')


def div(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, 'div')
    if np.any(b.data == 0):
        raise ContractViolation("div: divisor contains zero")

    def backward(g):
        return (_unbroadcast(g / b.data, a.shape),
                _unbroadcast(-g * a.data / (b.data * b.data), b.shape))
    return Tensor._from_op(a.data / b.data, (a, b), backward, 'div')


def neg(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    return Tensor._from_op(-a.data, (a,), lambda g: (-g,), 'neg')


def exp(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    with np.errstate(over='ignore'):
        out = np.exp(a.data)
    return Tensor._from_op(out, (a,), lambda g: (g * out,), 'exp')


def log(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data <= 0):
        raise ContractViolation("log: argument must be positive")
    return Tensor._from_op(np.log(a.data), (a,), lambda g: (g / a.data,), 'log')


def tanh(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return Tensor._from_op(out, (a,), lambda g: (g * (1.0 - out * out),), 'tanh')


def relu(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return Tensor._from_op(a.data * mask, (a,), lambda g: (g * mask,), 'relu')


# ============================================================================
# Reductions and linear algebra
# ============================================================================

def _normalize_axes(axis, ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def tensor_sum(a: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _normalize_axes(axis, a.ndim)
    out = a.data.sum(axis=axes, keepdims=keepdims)

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axes) if axes else g
        return (np.broadcast_to(g, a.shape).copy(),)
    return Tensor._from_op(out, (a,), backward, 'sum')


def mean(a: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _normalize_axes(axis, a.ndim)
    count = int(np.prod([a.shape[i] for i in axes])) if axes else 1
    if count == 0:
        raise ContractViolation(f"mean over an empty axis of shape {a.shape}")
    return tensor_sum(a, axes, keepdims) * (1.0 / count)


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError("matmul: expected (n, k) @ (k, m)", a.shape, b.shape)

    def backward(g):
        return g @ b.data.T, a.data.T @ g
    return Tensor._from_op(a.data @ b.data, (a, b), backward, 'matmul')


# ============================================================================
# Shape manipulation
# ============================================================================

def reshape(a: ArrayLike, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.data.reshape(tuple(shape))
    except ValueError:
        raise ShapeError("reshape: incompatible target shape", a.shape, tuple(shape)) from None
    return Tensor._from_op(out, (a,), lambda g: (g.reshape(a.shape),), 'reshape')


def transpose(a: ArrayLike, axes: Optional[Sequence[int]] = None) -> Tensor:
    a = as_tensor(a)
    axes = tuple(range(a.ndim))[::-1] if axes is None else tuple(axes)
    if sorted(axes) != list(range(a.ndim)):
        raise ShapeError(f"transpose: axes {axes} are not a permutation", a.shape)
    inverse = tuple(np.argsort(axes))
    return Tensor._from_op(a.data.transpose(axes), (a,),
                           lambda g: (g.transpose(inverse),), 'transpose')


def broadcast_to(a: ArrayLike, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    shape = tuple(shape)
    try:
        out = np.broadcast_to(a.data, shape).copy()
    except ValueError:
        raise ShapeError("broadcast_to: incompatible shapes", a.shape, shape) from None
    return Tensor._from_op(out, (a,), lambda g: (_unbroadcast(g, a.shape),), 'broadcast')


def concat(tensors: Sequence[ArrayLike], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ContractViolation("concat needs at least one tensor")
    ref = tensors[0]
    axis = axis % ref.ndim
    for t in tensors[1:]:
        if t.ndim != ref.ndim or any(t.shape[i] != ref.shape[i] for i in range(ref.ndim) if i != axis):
            raise ShapeError(f"concat: shapes disagree outside axis {axis}", ref.shape, t.shape)
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))
    return Tensor._from_op(np.concatenate([t.data for t in tensors], axis=axis),
                           tensors, backward, 'concat')


def index(a: ArrayLike, key) -> Tensor:
    """Basic and integer-array indexing (``a[key]``)."""
    a = as_tensor(a)
    try:
        out = a.data[key]
    except IndexError as exc:
        raise ShapeError(f"index {key!r} out of range: {exc}", a.shape) from None

    def backward(g):
        full = np.zeros(a.shape)
        np.add.at(full, key, g)
        return (full,)
    return Tensor._from_op(np.array(out), (a,), backward, 'slice')


def take(a: ArrayLike, indices: Sequence[int], axis: int = 1) -> Tensor:
    """Gather entries along ``axis`` (used for channel permutations)."""
    a = as_tensor(a)
    indices = np.asarray(indices, dtype=np.int64)
    axis = axis % a.ndim
    if indices.size and (indices.min() < 0 or indices.max() >= a.shape[axis]):
        raise ShapeError(f"take: indices out of range for axis {axis}", a.shape, indices.shape)

    def backward(g):
        full = np.zeros(a.shape)
        key = [slice(None)] * a.ndim
        key[axis] = indices
        np.add.at(full, tuple(key), g)
        return (full,)
    return Tensor._from_op(np.take(a.data, indices, axis=axis), (a,), backward, 'take')


def split(a: ArrayLike, sizes: Sequence[int], axis: int = 1) -> List[Tensor]:
    a = as_tensor(a)
    if sum(sizes) != a.shape[axis]:
        raise ShapeError(f"split sizes {list(sizes)} do not cover axis {axis}", a.shape)
    pieces, start = [], 0
    for size in sizes:
        key = [slice(None)] * a.ndim
        key[axis] = slice(start, start + size)
        pieces.append(index(a, tuple(key)))
        start += size
    return pieces


# ============================================================================
# Convolution and normalisation
# ============================================================================

def conv2d(x: ArrayLike, weight: ArrayLike, bias: Optional[ArrayLike] = None,
           stride: int = 1, padding: int = 0) -> Tensor:
    """
    2-D cross-correlation on NCHW input.

    Args:
        x: Input (N, C, H, W)
        weight: Kernels (O, C, kh, kw)
        bias: Optional (O,)
        stride: Step between output positions
        padding: Zero padding on each spatial border

    Returns:
        Output (N, O, Ho, Wo)
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 4 or weight.ndim != 4 or x.shape[1] != weight.shape[1]:
        raise ShapeError("conv2d: expected (N, C, H, W) input and (O, C, kh, kw) kernels",
                         x.shape, weight.shape)
    n, c, h, w = x.shape
    o, _, kh, kw = weight.shape
    if h + 2 * padding < kh or w + 2 * padding < kw:
        raise ShapeError("conv2d: kernel larger than padded input", x.shape, weight.shape)
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    ho, wo = windows.shape[2], windows.shape[3]
    out = np.einsum('nchwij,ocij->nohw', windows, weight.data, optimize=True)
    parents: List[Tensor] = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (o,):
            raise ShapeError("conv2d: bias must have one entry per output channel", bias.shape, (o,))
        out = out + bias.data[None, :, None, None]
        parents.append(bias)

    def backward(g):
        grad_w = np.einsum('nohw,nchwij->ocij', g, windows, optimize=True)
        grad_xp = np.zeros(xp.shape)
        for i in range(kh):
            for j in range(kw):
                grad_xp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += \
                    np.einsum('nohw,oc->nchw', g, weight.data[:, :, i, j], optimize=True)
        grad_x = grad_xp[:, :, padding:padding + h, padding:padding + w]
        if bias is not None:
            return grad_x, grad_w, g.sum(axis=(0, 2, 3))
        return grad_x, grad_w
    return Tensor._from_op(out, parents, backward, 'conv2d')


def batch_normalize(x: ArrayLike, eps: float = 1e-5) -> Tuple[Tensor, np.ndarray, np.ndarray]:
    """
    Normalise with batch statistics over every axis except the channel axis 1.

    Returns:
        Tuple of (normalised tensor, batch mean, biased batch variance)
    """
    x = as_tensor(x)
    if x.ndim < 2:
        raise ShapeError("batch_normalize: expected (N, C, ...) input", x.shape)
    axes = tuple(i for i in range(x.ndim) if i != 1)
    count = int(np.prod([x.shape[i] for i in axes]))
    mu = x.data.mean(axis=axes, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=axes, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std

    def backward(g):
        g_sum = g.sum(axis=axes, keepdims=True)
        gx_sum = (g * xhat).sum(axis=axes, keepdims=True)
        return (inv_std / count * (count * g - g_sum - xhat * gx_sum),)
    out = Tensor._from_op(xhat, (x,), backward, 'batch_norm')
    return out, mu.reshape(-1), var.reshape(-1)


# ============================================================================
# Reverse pass
# ============================================================================

def _topological_order(root: Tensor) -> List[Tensor]:
    order: List[Tensor] = []
    visited = set()
    stack: List[Tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> None:
    """
    Accumulate d(loss)/d(leaf) into every reachable leaf's ``grad``.

    Raises:
        ContractViolation: If loss is not a single value
    """
    if loss.size != 1:
        raise ContractViolation(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(_topological_order(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = np.array(g, dtype=np.float64) if node.grad is None else node.grad + g
            continue
        for parent, parent_grad in zip(node._parents, node._backward(g)):
            if parent_grad is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = parent_grad if key not in grads else grads[key] + parent_grad
