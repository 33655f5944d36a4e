#!/usr/bin/env python3
"""
cINN Latent Lab - Latent Space Operations
-----------------------------------------
Everything that manipulates latent codes of a trained model: encode/decode,
scaling, style transfer to a new condition, linear interpolation grids,
principal axes of a set of codes and traversal along them.

All operations run the model in eval mode without building a graph.

License: BSD 3-Clause
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from pkg.errors import ContractViolation, ShapeError
from pkg.flow.cinn import CINN, inference

logger = logging.getLogger(__name__)

ALPHA_STRIP = (0.0, 0.7, 0.9, 1.0, 1.25)
GRID_RANGE = (-0.9, 0.9)


@dataclass
class LatentCode:
    """Latent vectors (N, d) plus where they came from."""
    z: np.ndarray
    provenance: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.z = np.atleast_2d(np.asarray(self.z, dtype=np.float64))

    def __len__(self) -> int:
        return len(self.z)

    @property
    def dim(self) -> int:
        return self.z.shape[1]


def _latents(z: Union[LatentCode, np.ndarray]) -> np.ndarray:
    return z.z if isinstance(z, LatentCode) else np.asarray(z, dtype=np.float64)


def encode(x, y, model: CINN, provenance: Optional[Dict[str, Any]] = None) -> LatentCode:
    """z = f(x; phi(y)) for a batch."""
    with inference(model):
        z = model.forward(x, y).z.numpy().copy()
    return LatentCode(z, dict(provenance or {}, operation='encode'))


def decode(code: Union[LatentCode, np.ndarray], y, model: CINN) -> np.ndarray:
    """x = g(z; phi(y)) for a batch of codes and matching conditions."""
    z = np.atleast_2d(_latents(code))
    if z.shape[1] != model.dim:
        raise ShapeError(f"latent codes must have {model.dim} entries", z.shape)
    with inference(model):
        return model.inverse(z, y).numpy().copy()


def scale_latent(z, alpha: float) -> np.ndarray:
    """alpha * z; the norm scales by exactly |alpha|."""
    return alpha * _latents(z)


def transfer(code: Union[LatentCode, np.ndarray], y_new, model: CINN) -> np.ndarray:
    """Decode existing codes under new conditions (keeps the style, changes the content)."""
    return decode(code, y_new, model)


def interpolate(z1, z2, a1: float, a2: float) -> np.ndarray:
    """
    a1 * z1 + a2 * z2.

    Raises:
        ShapeError: If the codes differ in shape
    """
    z1, z2 = _latents(z1), _latents(z2)
    if z1.shape != z2.shape:
        raise ShapeError("interpolated codes must share one shape", z1.shape, z2.shape)
    return a1 * z1 + a2 * z2


def interpolation_grid(z1, z2, n: int = 5, low: float = GRID_RANGE[0],
                       high: float = GRID_RANGE[1]) -> np.ndarray:
    """
    Codes a1 * z1 + a2 * z2 on an n x n grid of (a1, a2) in [low, high]^2.

    Returns:
        (n * n, d) array, rows ordered by a1 then a2
    """
    if n < 1:
        raise ContractViolation(f"grid size must be positive, got {n}")
    z1, z2 = _latents(z1).reshape(-1), _latents(z2).reshape(-1)
    weights = np.linspace(low, high, n)
    return np.stack([interpolate(z1, z2, a1, a2) for a1 in weights for a2 in weights])


def alpha_strip(z, alphas: Sequence[float] = ALPHA_STRIP) -> np.ndarray:
    """One scaled copy of a single code per alpha, shape (len(alphas), d)."""
    z = _latents(z).reshape(-1)
    return np.stack([scale_latent(z, a) for a in alphas])


@dataclass
class LatentPCA:
    """
    Principal axes of a set of codes.

    Attributes:
        mean: (d,) centre of the codes
        axes: (d, d) orthonormal rows, descending variance
        variances: Variance along each axis
    """
    mean: np.ndarray
    axes: np.ndarray
    variances: np.ndarray

    @property
    def explained_ratio(self) -> np.ndarray:
        total = self.variances.sum()
        if total <= 0:
            return np.zeros_like(self.variances)
        return self.variances / total

    def project(self, z) -> np.ndarray:
        """Coordinates of codes along the principal axes."""
        z = np.atleast_2d(_latents(z))
        if z.shape[1] != len(self.mean):
            raise ShapeError("codes do not match the PCA dimension", (len(self.mean),), z.shape)
        return (z - self.mean) @ self.axes.T

    def reconstruct(self, coords) -> np.ndarray:
        return np.atleast_2d(coords) @ self.axes + self.mean

    def traverse(self, axis: int, steps: Sequence[float] = (-2.0, -1.0, 0.0, 1.0, 2.0),
                 base=None) -> np.ndarray:
        """
        Codes along one principal axis, ``steps`` in standard deviations.

        Starts from ``base`` (default: the mean code).
        """
        if not 0 <= axis < len(self.axes):
            raise ContractViolation(f"axis {axis} outside 0..{len(self.axes) - 1}")
        origin = self.mean if base is None else _latents(base).reshape(-1)
        scale = np.sqrt(max(self.variances[axis], 0.0))
        return np.stack([origin + s * scale * self.axes[axis] for s in steps])


def latent_pca(codes: Union[Sequence[LatentCode], LatentCode, np.ndarray]) -> LatentPCA:
    """
    PCA by eigendecomposition of the covariance of mean-centred codes.

    Each axis is signed so that its first non-zero component is positive.

    Raises:
        ContractViolation: With fewer than two codes
        ShapeError: If codes differ in dimension
    """
    if isinstance(codes, LatentCode):
        z = codes.z
    elif isinstance(codes, np.ndarray):
        z = np.atleast_2d(codes.astype(np.float64))
    else:
        dims = {c.dim for c in codes}
        if len(dims) > 1:
            raise ShapeError("codes differ in dimension", *sorted((d,) for d in dims))
        z = np.concatenate([c.z for c in codes]) if codes else np.zeros((0, 0))
    if len(z) < 2:
        raise ContractViolation(f"PCA needs at least two codes, got {len(z)}")
    mean = z.mean(axis=0)
    centered = z - mean
    covariance = centered.T @ centered / (len(z) - 1)
    variances, vectors = np.linalg.eigh(covariance)
    order = np.argsort(variances)[::-1]
    variances = np.clip(variances[order], 0.0, None)
    axes = vectors[:, order].T
    for row in axes:
        nonzero = np.flatnonzero(np.abs(row) > 1e-12)
        if nonzero.size and row[nonzero[0]] < 0:
            row *= -1.0
    logger.debug(f"Latent PCA over {len(z)} codes: top ratio "
                 f"{variances[0] / max(variances.sum(), 1e-300):.3f}")
    return LatentPCA(mean, axes, variances)


def class_style_transfer(z, model: CINN, num_classes: Optional[int] = None) -> np.ndarray:
    """
    Decode one code under every one-hot class condition.

    Returns:
        (num_classes,) + input_shape array
    """
    z = _latents(z).reshape(1, -1)
    num_classes = num_classes or model.spec.condition_shape[0]
    if model.spec.condition_shape != (num_classes,):
        raise ShapeError("class style transfer needs a one-hot condition",
                         model.spec.condition_shape, (num_classes,))
    conditions = np.eye(num_classes)
    return decode(np.repeat(z, num_classes, axis=0), conditions, model)


def codes_from_rows(z: np.ndarray, provenance: Optional[Dict[str, Any]] = None) -> List[LatentCode]:
    return [LatentCode(row, dict(provenance or {}, index=i)) for i, row in enumerate(z)]
