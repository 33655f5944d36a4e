#!/usr/bin/env python3
"""
cINN Training - Configuration
-----------------------------
Training hyper-parameters and the YAML run file that bundles them with the
task and architecture sections:

    task:
      task: toy-colorization
      samples: 2000
    architecture:
      conditioning: conv
      blocks_per_level: [2, 2]
    training:
      steps: 3000
      lr: 0.001
      milestones: [2000, 2500]

Unknown sections or keys are rejected.

License: BSD 3-Clause
"""

import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Union

import yaml

from pkg.datasets.tasks import ToyTaskSpec
from pkg.errors import ConfigurationError
from pkg.flow.architecture import ArchitectureConfig

logger = logging.getLogger(__name__)

DEFAULT_NOISE_SIGMA = 2.0 / 256.0
SECTIONS = ('task', 'architecture', 'training')


@dataclass
class TrainConfig:
    """
    Training hyper-parameters.

    The four ablation switches (noise, permutations, clamping, wavelet) each
    turn one component of the full method off when set to False.
    """
    batch_size: int = 64
    steps: int = 1000
    lr: float = 1e-3
    milestones: List[int] = field(default_factory=list)
    decay_factor: float = 10.0
    weight_decay: float = 1e-5
    noise_sigma: float = DEFAULT_NOISE_SIGMA
    noise: bool = True
    permutations: bool = True
    clamping: bool = True
    wavelet: bool = True
    freeze_conditioning: bool = False
    seed: int = 0
    num_workers: int = 0
    log_every: int = 50
    checkpoint_every: int = 0
    divergence_factor: float = 10.0
    divergence_reference_step: int = 100

    def __post_init__(self):
        self.milestones = [int(m) for m in self.milestones]
        self.validate()

    def validate(self) -> None:
        """
        Raises:
            ConfigurationError: On non-positive rates or sizes, or milestones
                that are not strictly increasing and below ``steps``
        """
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be positive, got {self.batch_size}")
        if self.steps < 1:
            raise ConfigurationError(f"steps must be positive, got {self.steps}")
        if self.lr <= 0:
            raise ConfigurationError(f"lr must be positive, got {self.lr}")
        if self.decay_factor <= 0:
            raise ConfigurationError(f"decay_factor must be positive, got {self.decay_factor}")
        if self.weight_decay < 0 or self.noise_sigma < 0:
            raise ConfigurationError("weight_decay and noise_sigma must be non-negative")
        if any(b <= a for a, b in zip(self.milestones, self.milestones[1:])):
            raise ConfigurationError(f"milestones must be strictly increasing: {self.milestones}")
        if self.milestones and (self.milestones[0] <= 0 or self.milestones[-1] >= self.steps):
            raise ConfigurationError(f"milestones must lie in (0, {self.steps}): {self.milestones}")
        if self.num_workers < 0 or self.log_every < 1 or self.checkpoint_every < 0:
            raise ConfigurationError("num_workers/checkpoint_every must be >= 0 and log_every >= 1")
        if self.divergence_factor <= 0 or self.divergence_reference_step < 1:
            raise ConfigurationError("divergence settings must be positive")

    @property
    def effective_noise_sigma(self) -> float:
        return self.noise_sigma if self.noise else 0.0

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TrainConfig':
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"Unknown keys in [training]: {unknown}")
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class RunConfig:
    """All three sections of a run file."""
    task: ToyTaskSpec
    architecture: ArchitectureConfig
    training: TrainConfig

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunConfig':
        if not isinstance(data, dict):
            raise ConfigurationError("config must be a mapping of sections")
        unknown = sorted(set(data) - set(SECTIONS))
        if unknown:
            raise ConfigurationError(f"Unknown config sections: {unknown}. Valid: {SECTIONS}")
        sections = {}
        for name in SECTIONS:
            section = data.get(name) or {}
            if not isinstance(section, dict):
                raise ConfigurationError(f"[{name}] must be a mapping")
            sections[name] = section
        try:
            return cls(task=ToyTaskSpec.from_dict(sections['task']),
                       architecture=ArchitectureConfig.from_dict(sections['architecture']),
                       training=TrainConfig.from_dict(sections['training']))
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from None

    def to_dict(self) -> Dict[str, Any]:
        return {'task': self.task.to_dict(),
                'architecture': self.architecture.to_dict(),
                'training': self.training.to_dict()}

    def architecture_spec(self, input_shape, condition_shape):
        """Architecture for the given data shapes with this run's ablation switches."""
        t = self.training
        return self.architecture.to_spec(input_shape, condition_shape, seed=t.seed,
                                         permutations=t.permutations, clamping=t.clamping,
                                         wavelet=t.wavelet)


def load_config(path: Union[str, Path]) -> RunConfig:
    """
    Read a YAML run file.

    Raises:
        FileNotFoundError: If the file does not exist
        ConfigurationError: On YAML syntax errors or unknown sections/keys
    """
    with open(path, 'r') as f:
        try:
            data = yaml.safe_load(f)
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"{path}: invalid YAML: {exc}") from None
    config = RunConfig.from_dict(data or {})
    logger.info(f"Loaded config {path}: task={config.task.task}, steps={config.training.steps}")
    return config


def save_config(config: RunConfig, path: Union[str, Path]) -> None:
    with open(path, 'w') as f:
        yaml.safe_dump(config.to_dict(), f, sort_keys=False)
