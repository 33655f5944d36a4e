"""
cINN Flow Package
-----------------
Architecture specs, invertible stages, the flow model, the conditional INN
wrapper, the maximum-likelihood loss and posterior sampling.

License: BSD 3-Clause
"""

from .architecture import ArchitectureConfig, ArchitectureSpec, STAGE_TYPES, standard_stages
from .stages import (CouplingStage, DownsampleStage, FlattenStage, PermutationStage,
                     SplitStage, Stage)
from .model import DensityEval, FlowModel, forward, inverse, permutation_seed
from .cinn import CINN, inference
from .loss import LossValue, cml_from_density, cml_loss, nll_per_dim
from .sampling import repeat_condition, sample

__all__ = [
    'ArchitectureConfig',
    'ArchitectureSpec',
    'STAGE_TYPES',
    'standard_stages',
    'Stage',
    'CouplingStage',
    'PermutationStage',
    'DownsampleStage',
    'SplitStage',
    'FlattenStage',
    'DensityEval',
    'FlowModel',
    'forward',
    'inverse',
    'permutation_seed',
    'CINN',
    'inference',
    'LossValue',
    'cml_from_density',
    'cml_loss',
    'nll_per_dim',
    'repeat_condition',
    'sample',
]
