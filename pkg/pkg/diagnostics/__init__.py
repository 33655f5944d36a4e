"""
cINN Diagnostics Package
------------------------
Invertibility, log-determinant, gradient and wavelet self-checks.

License: BSD 3-Clause
"""

from .checks import (DiagnosticResult, all_passed, check_gradient, check_haar,
                     check_invertibility, check_logdet, finite_difference_jacobian,
                     run_diagnostics)

__all__ = [
    'DiagnosticResult',
    'all_passed',
    'check_gradient',
    'check_haar',
    'check_invertibility',
    'check_logdet',
    'finite_difference_jacobian',
    'run_diagnostics',
]
