"""
cINN Training Package
---------------------
Run configuration, dequantisation and batching, the maximum-likelihood
trainer and binary checkpoints. The ablation runner lives in
``pkg.training.ablation``.

License: BSD 3-Clause
"""

from .config import (DEFAULT_NOISE_SIGMA, RunConfig, TrainConfig, load_config,
                     save_config)
from .data import Batch, BatchLoader, dequantize, make_batch
from .checkpoint import (Checkpoint, check_architecture, decode_checkpoint,
                         encode_checkpoint, load_checkpoint, restore, save_checkpoint)
from .trainer import TrainResult, Trainer, divergence_threshold, train

__all__ = [
    'DEFAULT_NOISE_SIGMA',
    'RunConfig',
    'TrainConfig',
    'load_config',
    'save_config',
    'Batch',
    'BatchLoader',
    'dequantize',
    'make_batch',
    'Checkpoint',
    'check_architecture',
    'decode_checkpoint',
    'encode_checkpoint',
    'load_checkpoint',
    'restore',
    'save_checkpoint',
    'TrainResult',
    'Trainer',
    'divergence_threshold',
    'train',
]
