#!/usr/bin/env python3
"""
cINN Flow - Architecture Specification
--------------------------------------
Declarative description of a cINN: data and condition shapes, the
conditioning network, and the ordered list of invertible stages.

The spec is serialised as JSON inside every checkpoint, so a checkpoint can
rebuild its own model and reject a model it does not belong to.

Stage entries are small dicts with a ``type`` key:

    coupling  conditional coupling block (conv on images, dense on vectors)
    permute   fixed random channel permutation
    haar      Haar wavelet downsampling (starts the next resolution level)
    squeeze   naive space-to-depth downsampling (ablation)
    split     route half the channels straight to the latent vector
    flatten   images -> vectors, followed by dense coupling blocks

License: BSD 3-Clause
"""

import json
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional, Sequence, Tuple

from pkg.errors import ConfigurationError

STAGE_TYPES = ('coupling', 'permute', 'haar', 'squeeze', 'split', 'flatten')
DOWNSAMPLE_TYPES = ('haar', 'squeeze')


@dataclass
class ArchitectureSpec:
    """Complete, serialisable description of one cINN."""
    input_shape: Tuple[int, ...]
    condition_shape: Tuple[int, ...]
    stages: List[Dict[str, Any]]
    conditioning: str = 'dense'
    cond_widths: List[int] = field(default_factory=lambda: [32])
    cond_hidden: int = 64
    zero_init_heads: bool = False
    subnet_hidden: int = 64
    clamp: bool = True
    gamma_init: float = 0.1
    batch_norm: bool = True
    seed: int = 0

    def __post_init__(self):
        self.input_shape = tuple(int(s) for s in self.input_shape)
        self.condition_shape = tuple(int(s) for s in self.condition_shape)
        self.cond_widths = [int(w) for w in self.cond_widths]
        self.stages = [dict(stage) for stage in self.stages]
        for i, stage in enumerate(self.stages):
            if stage.get('type') not in STAGE_TYPES:
                raise ConfigurationError(f"Stage {i} has unknown type {stage.get('type')!r}")
        if len(self.input_shape) not in (1, 3):
            raise ConfigurationError(f"Input must be (D,) or (C, H, W), got {self.input_shape}")
        if self.num_levels != len(self.cond_widths):
            raise ConfigurationError(
                f"{self.num_levels} resolution levels but {len(self.cond_widths)} condition widths")

    @property
    def num_levels(self) -> int:
        return 1 + sum(1 for s in self.stages if s['type'] in DOWNSAMPLE_TYPES)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['input_shape'] = list(self.input_shape)
        data['condition_shape'] = list(self.condition_shape)
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ArchitectureSpec':
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"Unknown architecture keys: {unknown}")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> 'ArchitectureSpec':
        return cls.from_dict(json.loads(text))

    def first_difference(self, other: 'ArchitectureSpec') -> Optional[str]:
        """
        Describe the first difference to ``other``, or None if equal.

        Stage differences are reported by index; other fields by name.
        """
        for i, (mine, theirs) in enumerate(zip(self.stages, other.stages)):
            if mine != theirs:
                return f"stage {i}: {mine} != {theirs}"
        if len(self.stages) != len(other.stages):
            i = min(len(self.stages), len(other.stages))
            return f"stage {i}: stage counts differ ({len(self.stages)} != {len(other.stages)})"
        mine, theirs = self.to_dict(), other.to_dict()
        for key in sorted(mine):
            if key != 'stages' and mine[key] != theirs[key]:
                return f"{key}: {mine[key]} != {theirs[key]}"
        return None

    def first_differing_stage(self, other: 'ArchitectureSpec') -> Optional[int]:
        for i, (mine, theirs) in enumerate(zip(self.stages, other.stages)):
            if mine != theirs:
                return i
        if len(self.stages) != len(other.stages):
            return min(len(self.stages), len(other.stages))
        return None


def standard_stages(input_shape: Sequence[int], blocks_per_level: Sequence[int],
                    dense_blocks: int = 0, split: bool = True, downsample: str = 'haar',
                    permute: bool = True) -> List[Dict[str, Any]]:
    """
    Multi-resolution stage layout.

    Images get ``blocks_per_level[k]`` conv coupling blocks at level k, with a
    downsampling step (and optionally a split) between levels, then optionally
    a flatten followed by ``dense_blocks`` dense coupling blocks. Vectors get
    ``blocks_per_level[0] + dense_blocks`` dense coupling blocks.

    Args:
        input_shape: (D,) or (C, H, W)
        blocks_per_level: Coupling blocks per resolution level
        dense_blocks: Fully connected blocks after flattening
        split: Split off half the channels after each downsampling
        downsample: 'haar' or 'squeeze'
        permute: Insert a fixed permutation after every coupling block
    """
    if downsample not in DOWNSAMPLE_TYPES:
        raise ConfigurationError(f"Unknown downsampling {downsample!r}")
    if not blocks_per_level:
        raise ConfigurationError("blocks_per_level must name at least one level")
    stages: List[Dict[str, Any]] = []

    def couplings(count: int) -> None:
        for _ in range(count):
            stages.append({'type': 'coupling'})
            if permute:
                stages.append({'type': 'permute'})

    if len(input_shape) == 1:
        if len(blocks_per_level) != 1:
            raise ConfigurationError("vector inputs have a single resolution level")
        couplings(blocks_per_level[0] + dense_blocks)
        return stages

    last = len(blocks_per_level) - 1
    for level, count in enumerate(blocks_per_level):
        couplings(count)
        if level < last:
            stages.append({'type': downsample})
            if split:
                stages.append({'type': 'split'})
    if dense_blocks:
        stages.append({'type': 'flatten'})
        couplings(dense_blocks)
    return stages


@dataclass
class ArchitectureConfig:
    """
    The ``architecture`` section of a training config.

    Shapes come from the data and the switches for permutations, clamping and
    the downsampling method come from the training section, so one section
    can describe a whole ablation family.
    """
    conditioning: str = 'dense'
    blocks_per_level: List[int] = field(default_factory=lambda: [4])
    dense_blocks: int = 0
    split: bool = True
    cond_width: int = 32
    cond_hidden: int = 64
    subnet_hidden: int = 64
    gamma_init: float = 0.1
    batch_norm: bool = True
    zero_init_heads: bool = False

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ArchitectureConfig':
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"Unknown keys in [architecture]: {unknown}")
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_spec(self, input_shape: Sequence[int], condition_shape: Sequence[int],
                seed: int = 0, permutations: bool = True, clamping: bool = True,
                wavelet: bool = True) -> ArchitectureSpec:
        stages = standard_stages(input_shape, self.blocks_per_level, self.dense_blocks,
                                 split=self.split,
                                 downsample='haar' if wavelet else 'squeeze',
                                 permute=permutations)
        levels = 1 + sum(1 for s in stages if s['type'] in DOWNSAMPLE_TYPES)
        return ArchitectureSpec(
            input_shape=tuple(input_shape),
            condition_shape=tuple(condition_shape),
            stages=stages,
            conditioning=self.conditioning,
            cond_widths=[self.cond_width] * levels,
            cond_hidden=self.cond_hidden,
            zero_init_heads=self.zero_init_heads,
            subnet_hidden=self.subnet_hidden,
            clamp=clamping,
            gamma_init=self.gamma_init,
            batch_norm=self.batch_norm,
            seed=seed,
        )
