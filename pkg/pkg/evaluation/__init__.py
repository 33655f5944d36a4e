"""
cINN Evaluation Package
-----------------------
Likelihood, best-of-N, diversity and mode-coverage metrics.

License: BSD 3-Clause
"""

from .metrics import (SampleQuality, best_of_n, evaluate_nll, mode_frequencies,
                      pixel_variance, sample_quality)

__all__ = [
    'SampleQuality',
    'best_of_n',
    'evaluate_nll',
    'mode_frequencies',
    'pixel_variance',
    'sample_quality',
]
