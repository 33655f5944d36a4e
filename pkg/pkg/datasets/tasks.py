#!/usr/bin/env python3
"""
cINN Datasets - Toy Tasks
-------------------------
Seed-deterministic conditional generation problems with a known answer:

- affine-gaussian: X|Y = N(a*y, sigma^2), analytic conditional entropy
- conditional-mixture: 2 modes with y-dependent weights (0.2 / 0.5 / 0.8),
  or 8 modes on a ring; sampling oracle plus nearest-center mode assignment
- toy-colorization: 16x16 procedural shapes, luminance in [0, 1] as the
  condition, 2 chroma channels in [-1, 1] as the target; several colours
  share a luminance, so the true posterior is multimodal
- class-digits: 8x8 synthetic glyphs with a one-hot class condition

License: BSD 3-Clause
"""

import logging
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from pkg.errors import ConfigurationError, ContractViolation, ShapeError
from pkg.numerics.rng import RngStreams
from .tensorfile import read_tensor, write_tensor

logger = logging.getLogger(__name__)

TASK_NAMES = ('affine-gaussian', 'conditional-mixture', 'toy-colorization', 'class-digits')


@dataclass
class ToyTaskSpec:
    """The ``task`` section of a config (and of ``gen-task --spec``)."""
    task: str = 'affine-gaussian'
    samples: int = 2000
    test_samples: int = 500
    seed: int = 0
    slope: float = 0.8
    sigma: Optional[float] = None
    modes: int = 2
    image_size: int = 16

    def __post_init__(self):
        if self.task not in TASK_NAMES:
            raise ConfigurationError(f"Unknown task: {self.task}. Valid options: {TASK_NAMES}")
        if self.samples < 1 or self.test_samples < 0:
            raise ConfigurationError("sample counts must be positive")
        if self.sigma is not None and self.sigma <= 0:
            raise ConfigurationError(f"sigma must be positive, got {self.sigma}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ToyTaskSpec':
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"Unknown keys in [task]: {unknown}")
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class Dataset:
    """Paired data x and conditions y, one row per sample."""
    x: np.ndarray
    y: np.ndarray
    name: str = ''

    def __post_init__(self):
        if len(self.x) != len(self.y):
            raise ShapeError("x and y need the same number of rows", self.x.shape, self.y.shape)

    def __len__(self) -> int:
        return len(self.x)

    @property
    def input_shape(self) -> Tuple[int, ...]:
        return tuple(self.x.shape[1:])

    @property
    def condition_shape(self) -> Tuple[int, ...]:
        return tuple(self.y.shape[1:])

    def subset(self, indices) -> 'Dataset':
        return Dataset(self.x[indices], self.y[indices], self.name)

    def save(self, directory: Union[str, Path], prefix: str = '') -> Tuple[Path, Path]:
        directory = Path(directory)
        x_path = directory / f"{prefix}x.tnsr"
        y_path = directory / f"{prefix}y.tnsr"
        write_tensor(x_path, self.x)
        write_tensor(y_path, self.y)
        return x_path, y_path

    @classmethod
    def load(cls, directory: Union[str, Path], prefix: str = '') -> 'Dataset':
        directory = Path(directory)
        return cls(read_tensor(directory / f"{prefix}x.tnsr"),
                   read_tensor(directory / f"{prefix}y.tnsr"), name=directory.name)


def one_hot(labels: np.ndarray, classes: int) -> np.ndarray:
    out = np.zeros((len(labels), classes))
    out[np.arange(len(labels)), labels] = 1.0
    return out


class ToyTask:
    """Base interface of every toy task."""

    name = 'toy'
    input_shape: Tuple[int, ...] = ()
    condition_shape: Tuple[int, ...] = ()

    def generate(self, n: int, rng: np.random.Generator) -> Dataset:
        raise NotImplementedError

    def entropy(self) -> Optional[float]:
        """Analytic H(X|Y) in nats per dimension, if known."""
        return None

    def posterior_sample(self, y: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        """n draws from the true p(x | y) for one condition y."""
        raise NotImplementedError


class AffineGaussianTask(ToyTask):
    """y ~ N(0, 1), x = slope * y + sigma * eps."""

    name = 'affine-gaussian'
    input_shape = (1,)
    condition_shape = (1,)

    def __init__(self, slope: float = 0.8, sigma: float = 0.3):
        self.slope = slope
        self.sigma = sigma

    def generate(self, n: int, rng: np.random.Generator) -> Dataset:
        y = rng.standard_normal((n, 1))
        x = self.slope * y + self.sigma * rng.standard_normal((n, 1))
        return Dataset(x, y, self.name)

    def entropy(self) -> Optional[float]:
        return 0.5 * math.log(2.0 * math.pi * math.e * self.sigma ** 2)

    def posterior_sample(self, y: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        mu = self.slope * float(np.asarray(y).reshape(-1)[0])
        return mu + self.sigma * rng.standard_normal((n, 1))


class ConditionalMixtureTask(ToyTask):
    """
    Isotropic 2-D Gaussian mixture whose weights depend on a one-hot y.

    Args:
        centers: (K, 2) mode centres
        weights: (Y, K) mode weights per condition class, rows sum to 1
        sigma: Per-mode standard deviation
    """

    name = 'conditional-mixture'
    input_shape = (2,)

    def __init__(self, centers: np.ndarray, weights: np.ndarray, sigma: float = 0.2):
        self.centers = np.asarray(centers, dtype=np.float64)
        self.weights = np.asarray(weights, dtype=np.float64)
        if self.weights.shape[1] != len(self.centers):
            raise ConfigurationError("weights need one column per mode")
        if not np.allclose(self.weights.sum(axis=1), 1.0):
            raise ConfigurationError("mode weights must sum to 1 per condition")
        self.sigma = sigma
        self.condition_shape = (self.weights.shape[0],)

    @classmethod
    def two_mode(cls, sigma: float = 0.2) -> 'ConditionalMixtureTask':
        centers = [[-1.0, -1.0], [1.0, 1.0]]
        weights = [[0.2, 0.8], [0.5, 0.5], [0.8, 0.2]]
        return cls(centers, weights, sigma)

    @classmethod
    def ring(cls, modes: int = 8, radius: float = 2.0, sigma: float = 0.2) -> 'ConditionalMixtureTask':
        angles = 2.0 * np.pi * np.arange(modes) / modes
        centers = radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
        skewed = np.arange(1, modes + 1, dtype=np.float64)
        weights = np.stack([np.full(modes, 1.0 / modes), skewed / skewed.sum()])
        return cls(centers, weights, sigma)

    @property
    def num_modes(self) -> int:
        return len(self.centers)

    def condition(self, label: int) -> np.ndarray:
        return one_hot(np.array([label]), self.condition_shape[0])[0]

    def label_of(self, y: np.ndarray) -> int:
        y = np.asarray(y).reshape(-1)
        if y.shape != self.condition_shape:
            raise ShapeError("mixture condition must be one-hot", self.condition_shape, y.shape)
        return int(np.argmax(y))

    def _draw(self, labels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        modes = np.array([rng.choice(self.num_modes, p=self.weights[l]) for l in labels])
        return self.centers[modes] + self.sigma * rng.standard_normal((len(labels), 2))

    def generate(self, n: int, rng: np.random.Generator) -> Dataset:
        labels = rng.integers(0, self.condition_shape[0], size=n)
        x = self._draw(labels, rng)
        return Dataset(x, one_hot(labels, self.condition_shape[0]), self.name)

    def posterior_sample(self, y: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        return self._draw(np.full(n, self.label_of(y)), rng)

    def assign_modes(self, x: np.ndarray) -> np.ndarray:
        """Index of the nearest centre for every row of x."""
        x = np.asarray(x, dtype=np.float64).reshape(len(x), -1)
        distances = ((x[:, None, :] - self.centers[None, :, :]) ** 2).sum(axis=2)
        return np.argmin(distances, axis=1)

    def mode_means(self, x: np.ndarray) -> np.ndarray:
        """Mean of the rows assigned to each mode (NaN for empty modes)."""
        assignment = self.assign_modes(x)
        means = np.full((self.num_modes, x.shape[1]), np.nan)
        for k in range(self.num_modes):
            if np.any(assignment == k):
                means[k] = x[assignment == k].mean(axis=0)
        return means


# Luminance levels and the chroma pairs that share each level.
COLOR_LEVELS = np.array([0.25, 0.5, 0.75])
COLOR_CHROMA = np.array([
    [[0.6, -0.4], [-0.5, 0.5]],
    [[0.0, 0.0], [0.7, 0.7]],
    [[-0.6, -0.6], [0.4, -0.7]],
])


class ColorizationTask(ToyTask):
    """
    Procedural shapes coloured from a small palette.

    Every luminance level has two possible chroma pairs; within one image all
    regions of one level share a colour. The colour is invisible in the
    luminance channel, so each level is an independent fair coin.
    """

    name = 'toy-colorization'

    def __init__(self, size: int = 16):
        if size < 4 or size % 4:
            raise ConfigurationError(f"image size must be a multiple of 4, got {size}")
        self.size = size
        self.input_shape = (2, size, size)
        self.condition_shape = (1, size, size)

    def _level_map(self, rng: np.random.Generator) -> np.ndarray:
        size = self.size
        levels = np.full((size, size), rng.integers(len(COLOR_LEVELS)))
        rows, cols = np.mgrid[0:size, 0:size]
        for _ in range(rng.integers(1, 4)):
            level = rng.integers(len(COLOR_LEVELS))
            if rng.random() < 0.5:
                r0, c0 = rng.integers(0, size - 3, size=2)
                h, w = rng.integers(3, size // 2 + 1, size=2)
                mask = (rows >= r0) & (rows < r0 + h) & (cols >= c0) & (cols < c0 + w)
            else:
                cr, cc = rng.uniform(2, size - 2, size=2)
                radius = rng.uniform(2, size / 3)
                mask = (rows - cr) ** 2 + (cols - cc) ** 2 <= radius ** 2
            levels[mask] = level
        return levels

    def _colorize(self, levels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        choice = rng.integers(0, 2, size=len(COLOR_LEVELS))
        chroma = COLOR_CHROMA[levels, choice[levels]]
        return chroma.transpose(2, 0, 1)

    def generate(self, n: int, rng: np.random.Generator) -> Dataset:
        x = np.empty((n,) + self.input_shape)
        y = np.empty((n,) + self.condition_shape)
        for i in range(n):
            levels = self._level_map(rng)
            y[i, 0] = COLOR_LEVELS[levels]
            x[i] = self._colorize(levels, rng)
        return Dataset(x, y, self.name)

    def levels_of(self, luminance: np.ndarray) -> np.ndarray:
        lum = np.asarray(luminance).reshape(self.size, self.size)
        return np.argmin(np.abs(lum[..., None] - COLOR_LEVELS), axis=-1)

    def posterior_sample(self, y: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        levels = self.levels_of(y)
        return np.stack([self._colorize(levels, rng) for _ in range(n)])


DIGIT_GLYPHS = (
    ("..####..", ".#....#.", ".#...##.", ".#..#.#.", ".#.#..#.", ".##...#.", ".#....#.", "..####.."),
    ("...##...", "..###...", "...##...", "...##...", "...##...", "...##...", "...##...", "..####.."),
    ("..####..", ".#....#.", "......#.", ".....#..", "....#...", "...#....", "..#.....", ".######."),
    ("..####..", ".#....#.", "......#.", "...###..", "......#.", "......#.", ".#....#.", "..####.."),
    (".....#..", "....##..", "...#.#..", "..#..#..", ".#...#..", ".######.", ".....#..", ".....#.."),
    (".######.", ".#......", ".#......", ".#####..", "......#.", "......#.", ".#....#.", "..####.."),
    ("..####..", ".#......", ".#......", ".#####..", ".#....#.", ".#....#.", ".#....#.", "..####.."),
    (".######.", "......#.", ".....#..", "....#...", "...#....", "...#....", "...#....", "...#...."),
    ("..####..", ".#....#.", ".#....#.", "..####..", ".#....#.", ".#....#.", ".#....#.", "..####.."),
    ("..####..", ".#....#.", ".#....#.", ".#....#.", "..#####.", "......#.", "......#.", "..####.."),
)


def glyph_bitmap(digit: int) -> np.ndarray:
    return np.array([[ch == '#' for ch in row] for row in DIGIT_GLYPHS[digit]], dtype=np.float64)


class DigitsTask(ToyTask):
    """
    8x8 digit glyphs with random shift, stroke weight and intensity.

    The style variables are independent of the class, so one latent code
    decoded under different labels keeps its style.
    """

    name = 'class-digits'
    input_shape = (1, 8, 8)
    condition_shape = (10,)

    def _render(self, digit: int, rng: np.random.Generator) -> np.ndarray:
        image = glyph_bitmap(digit)
        if rng.random() < 0.5:
            image = np.maximum(image, np.pad(image, ((0, 0), (1, 0)))[:, :8])
        dr, dc = rng.integers(-1, 2, size=2)
        padded = np.pad(image, 1)
        image = padded[1 - dr:9 - dr, 1 - dc:9 - dc]
        return (image * rng.uniform(0.7, 1.0))[None]

    def generate(self, n: int, rng: np.random.Generator) -> Dataset:
        labels = rng.integers(0, 10, size=n)
        x = np.stack([self._render(int(d), rng) for d in labels])
        return Dataset(x, one_hot(labels, 10), self.name)

    def posterior_sample(self, y: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        digit = int(np.argmax(np.asarray(y).reshape(-1)))
        return np.stack([self._render(digit, rng) for _ in range(n)])


def make_task(spec: ToyTaskSpec) -> ToyTask:
    """Instantiate the task named by ``spec``."""
    if spec.task == 'affine-gaussian':
        return AffineGaussianTask(spec.slope, spec.sigma or 0.3)
    if spec.task == 'conditional-mixture':
        if spec.modes == 2:
            return ConditionalMixtureTask.two_mode(spec.sigma or 0.2)
        if spec.modes < 2:
            raise ConfigurationError(f"a mixture needs at least 2 modes, got {spec.modes}")
        return ConditionalMixtureTask.ring(spec.modes, sigma=spec.sigma or 0.2)
    if spec.task == 'toy-colorization':
        return ColorizationTask(spec.image_size)
    return DigitsTask()


def generate_dataset(spec: ToyTaskSpec, split: str = 'train') -> Dataset:
    """
    Draw the train or test split of a task.

    Splits use separate sub-streams of the ``data`` stream, so the test set
    does not change when the training set size does.
    """
    if split not in ('train', 'test'):
        raise ContractViolation(f"split must be 'train' or 'test', got {split!r}")
    task = make_task(spec)
    rng = RngStreams(spec.seed).generator('data', 0 if split == 'train' else 1)
    n = spec.samples if split == 'train' else spec.test_samples
    dataset = task.generate(n, rng)
    logger.info(f"Generated {split} split of {spec.task}: {len(dataset)} samples, "
                f"x {dataset.input_shape}, y {dataset.condition_shape}")
    return dataset
