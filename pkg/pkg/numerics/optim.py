#!/usr/bin/env python3
"""
cINN Numerics - Optimizer
-------------------------
Adam with decoupled weight decay and a multi-step learning-rate schedule.

Weight decay plays the role of the Gaussian prior on the network weights:
a decay rate lambda corresponds to a prior standard deviation with
lambda proportional to 1 / sigma^2.

License: BSD 3-Clause
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence

import numpy as np

from pkg.errors import ConfigurationError, ContractViolation
from .tensor import Parameter

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    """Moments and hyperparameters of one Adam optimizer."""
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    step: int = 0
    exp_avg: Dict[str, np.ndarray] = field(default_factory=dict)
    exp_avg_sq: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigurationError(f"Invalid learning rate: {self.lr}")
        if not 0.0 <= self.beta1 < 1.0 or not 0.0 <= self.beta2 < 1.0:
            raise ConfigurationError(f"Invalid betas: ({self.beta1}, {self.beta2})")
        if self.eps <= 0 or self.weight_decay < 0:
            raise ConfigurationError(f"Invalid eps/weight_decay: {self.eps}, {self.weight_decay}")


def adam_step(state: AdamState, params: Sequence[Parameter]) -> None:
    """
    Apply one Adam update to every trainable parameter holding a gradient,
    then clear the gradients.

    Raises:
        ContractViolation: If no parameter holds a gradient
    """
    active = [p for p in params if p.trainable and p.grad is not None]
    if not active:
        raise ContractViolation("adam_step called before any backward pass")

    state.step += 1
    t = state.step
    correction1 = 1.0 - state.beta1 ** t
    correction2 = 1.0 - state.beta2 ** t

    for p in active:
        key = p.name or str(id(p))
        grad = p.grad
        m = state.exp_avg.get(key)
        v = state.exp_avg_sq.get(key)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        m = state.beta1 * m + (1.0 - state.beta1) * grad
        v = state.beta2 * v + (1.0 - state.beta2) * grad * grad
        state.exp_avg[key] = m
        state.exp_avg_sq[key] = v

        update = (m / correction1) / (np.sqrt(v / correction2) + state.eps)
        decay = state.weight_decay * p.data
        p.assign(p.data - state.lr * (update + decay))

    for p in params:
        p.grad = None


class Adam:
    """Adam optimizer bound to a fixed list of parameters."""

    def __init__(self, params: Iterable[Parameter], lr: float = 1e-3,
                 betas=(0.9, 0.999), eps: float = 1e-8, weight_decay: float = 0.0):
        self.params: List[Parameter] = list(params)
        names = [p.name for p in self.params if p.name]
        if len(set(names)) != len(names):
            raise ConfigurationError("Adam needs uniquely named parameters")
        self.state = AdamState(lr=lr, beta1=betas[0], beta2=betas[1], eps=eps,
                               weight_decay=weight_decay)

    @property
    def lr(self) -> float:
        return self.state.lr

    @lr.setter
    def lr(self, value: float) -> None:
        self.state.lr = value

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        adam_step(self.state, self.params)

    def state_records(self) -> Dict[str, np.ndarray]:
        """Moments flattened into named arrays for the checkpoint."""
        records = {'adam.step': np.array([float(self.state.step)])}
        for key, m in self.state.exp_avg.items():
            records[f"adam.m.{key}"] = m
            records[f"adam.v.{key}"] = self.state.exp_avg_sq[key]
        return records

    def load_state_records(self, records: Dict[str, np.ndarray]) -> None:
        if 'adam.step' not in records:
            return
        self.state.step = int(records['adam.step'][0])
        self.state.exp_avg = {k[len('adam.m.'):]: v.copy() for k, v in records.items()
                              if k.startswith('adam.m.')}
        self.state.exp_avg_sq = {k[len('adam.v.'):]: v.copy() for k, v in records.items()
                                 if k.startswith('adam.v.')}


class MultiStepSchedule:
    """
    Learning rate divided by ``factor`` at each milestone.

    The decayed rate applies from the milestone step onwards.
    """

    def __init__(self, base_lr: float, milestones: Sequence[int] = (), factor: float = 10.0):
        milestones = list(milestones)
        if base_lr <= 0 or factor < 1:
            raise ConfigurationError(f"Invalid schedule: lr={base_lr}, factor={factor}")
        if any(b <= a for a, b in zip(milestones, milestones[1:])):
            raise ConfigurationError(f"Milestones must be strictly increasing: {milestones}")
        self.base_lr = base_lr
        self.milestones = milestones
        self.factor = factor

    def lr_at(self, step: int) -> float:
        drops = sum(1 for m in self.milestones if step >= m)
        return self.base_lr / (self.factor ** drops)
