#!/usr/bin/env python3
"""
cINN Training - Maximum-Likelihood Trainer
------------------------------------------
Adam on the conditional maximum-likelihood loss with a multi-step learning
rate schedule, an append-only CSV metric log, periodic and final checkpoints,
and divergence handling.

Divergence is declared when the loss is non-finite (or an operation raises
NumericError), or when it exceeds the reference loss recorded at
``divergence_reference_step`` by ``divergence_factor`` times the reference's
magnitude. The parameters from before the failing step are restored, a
checkpoint and a JSON report are written, and TrainingDivergedError is raised.

License: BSD 3-Clause
"""

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from pkg.datasets.tasks import Dataset
from pkg.errors import ContractViolation, NumericError, TrainingDivergedError
from pkg.flow.cinn import CINN
from pkg.flow.loss import cml_loss
from pkg.numerics.optim import Adam, MultiStepSchedule
from pkg.numerics.tensor import backward

from .checkpoint import save_checkpoint
from .config import TrainConfig
from .data import BatchLoader

logger = logging.getLogger(__name__)

CSV_FIELDS = ('step', 'cml', 'nll_nats_per_dim', 'lr', 'wall_ms')

PathLike = Union[str, Path]


@dataclass
class TrainResult:
    """Outcome of a completed training run."""
    steps: int
    final_cml: float
    final_nll: float
    history: List[Dict[str, float]] = field(default_factory=list)
    checkpoint_path: Optional[Path] = None


def divergence_threshold(reference: float, factor: float) -> float:
    """
    Loss above which training counts as diverged.

    "Exceeds the reference by ``factor`` times" is read as exceeding it by
    ``factor`` times its magnitude: ``reference + factor * |reference|``.
    The CML loss can be negative or close to zero, where a plain multiple of
    the reference would sit below it, so the magnitude is floored at 1.
    For a positive reference the limit is never below ``factor * reference``.
    """
    return reference + factor * max(abs(reference), 1.0)


class Trainer:
    """
    Trains one CINN on one dataset.

    Args:
        model: Model to train (updated in place)
        config: Training hyper-parameters
        out_path: Checkpoint path; None disables checkpoint files
        metrics_path: CSV log path; defaults to ``<out_path>.csv``
        metadata: Extra checkpoint metadata (config snapshot, task spec)
    """

    def __init__(self, model: CINN, config: TrainConfig, out_path: Optional[PathLike] = None,
                 metrics_path: Optional[PathLike] = None,
                 metadata: Optional[Dict[str, Any]] = None):
        self.model = model
        self.config = config
        self.out_path = Path(out_path) if out_path is not None else None
        if metrics_path is None and self.out_path is not None:
            metrics_path = self.out_path.with_suffix('.csv')
        self.metrics_path = Path(metrics_path) if metrics_path is not None else None
        self.metadata = dict(metadata or {})
        self.metadata.setdefault('training', config.to_dict())
        if config.freeze_conditioning:
            model.conditioning.freeze()
        self.params = [p for p in model.parameters() if p.trainable]
        if not self.params:
            raise ContractViolation("model has no trainable parameters")
        self.optimizer = Adam(self.params, lr=config.lr, weight_decay=config.weight_decay)
        self.schedule = MultiStepSchedule(config.lr, config.milestones, config.decay_factor)
        self.history: List[Dict[str, float]] = []
        self.reference: Optional[float] = None
        self.last_good: Dict[str, np.ndarray] = model.state_dict()
        self.last_good_step = 0

    # ------------------------------------------------------------------

    def _write_csv(self, row: Dict[str, float]) -> None:
        if self.metrics_path is None:
            return
        new_file = not self.metrics_path.exists()
        self.metrics_path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.metrics_path, 'a', newline='') as f:
            writer = csv.DictWriter(f, fieldnames=CSV_FIELDS)
            if new_file:
                writer.writeheader()
            writer.writerow(row)

    def _checkpoint(self, step: int, path: Optional[Path] = None) -> Optional[Path]:
        path = path or self.out_path
        if path is None:
            return None
        meta = dict(self.metadata, step=step)
        return save_checkpoint(path, self.model, meta, self.optimizer)

    def _diverge(self, step: int, reason: str, loss: Optional[float]) -> None:
        self.model.load_state_dict(self.last_good)
        report = {
            'step': step,
            'reason': reason,
            'loss': loss if loss is None or math.isfinite(loss) else str(loss),
            'reference': self.reference,
            'reference_step': self.config.divergence_reference_step,
            'lr': self.optimizer.lr,
            'restored_step': self.last_good_step,
        }
        logger.warning(f"Training diverged at step {step}: {reason}; "
                       f"restored parameters from step {self.last_good_step}")
        if self.out_path is not None:
            report['checkpoint'] = str(self._checkpoint(self.last_good_step))
            report_path = self.out_path.with_suffix('.divergence.json')
            report_path.write_text(json.dumps(report, indent=2))
            logger.warning(f"Divergence report written: {report_path}")
        raise TrainingDivergedError(f"training diverged at step {step}: {reason}", report)

    def _check_loss(self, step: int, cml: float) -> None:
        if not math.isfinite(cml):
            self._diverge(step, 'non-finite loss', cml)
        if step == self.config.divergence_reference_step:
            self.reference = cml
        if self.reference is not None and step > self.config.divergence_reference_step:
            limit = divergence_threshold(self.reference, self.config.divergence_factor)
            if cml > limit:
                self._diverge(step, f"loss {cml:.4g} exceeds {limit:.4g}", cml)

    # ------------------------------------------------------------------

    def fit(self, dataset: Dataset) -> TrainResult:
        """
        Run ``config.steps`` optimisation steps.

        Raises:
            TrainingDivergedError: On divergence (parameters restored first)
        """
        cfg = self.config
        loader = BatchLoader(dataset, cfg.batch_size, cfg.seed, cfg.effective_noise_sigma,
                             num_workers=cfg.num_workers, start=0, stop=cfg.steps)
        logger.info(f"Training started: {cfg.steps} steps, batch {cfg.batch_size}, "
                    f"lr {cfg.lr}, {sum(p.size for p in self.params)} trainable parameters")
        self.model.train()
        value = None
        try:
            for batch in loader:
                step = batch.step
                started = time.perf_counter()
                lr = self.schedule.lr_at(step)
                if lr != self.optimizer.lr:
                    logger.info(f"Step {step}: learning rate {self.optimizer.lr:g} -> {lr:g}")
                    self.optimizer.lr = lr
                try:
                    value = cml_loss(batch.x, batch.y, self.model)
                except NumericError as exc:
                    self._diverge(step, f"numeric error: {exc}", None)
                self._check_loss(step, value.cml)
                self.last_good = self.model.state_dict()
                self.last_good_step = step
                backward(value.loss)
                self.optimizer.step()

                row = {'step': step, 'cml': value.cml, 'nll_nats_per_dim': value.nll_nats_per_dim,
                       'lr': lr, 'wall_ms': (time.perf_counter() - started) * 1000.0}
                self.history.append(row)
                self._write_csv(row)
                if step % cfg.log_every == 0 or step == cfg.steps - 1:
                    logger.info(f"Step {step}: cml {value.cml:.4f}, "
                                f"nll {value.nll_nats_per_dim:.4f} nats/dim")
                if cfg.checkpoint_every and step and step % cfg.checkpoint_every == 0:
                    self._checkpoint(step)
        finally:
            loader.close()

        path = self._checkpoint(cfg.steps)
        logger.info(f"Training finished: final cml {value.cml:.4f}, "
                    f"nll {value.nll_nats_per_dim:.4f} nats/dim")
        return TrainResult(steps=cfg.steps, final_cml=value.cml,
                           final_nll=value.nll_nats_per_dim, history=self.history,
                           checkpoint_path=path)


def train(dataset: Dataset, config: TrainConfig, model: CINN,
          out_path: Optional[PathLike] = None, metrics_path: Optional[PathLike] = None,
          metadata: Optional[Dict[str, Any]] = None) -> TrainResult:
    """Train ``model`` on ``dataset``; see Trainer."""
    return Trainer(model, config, out_path, metrics_path, metadata).fit(dataset)
