"""
cINN Core Packages
------------------
Conditional invertible neural networks built on a small numpy autodiff core.

License: BSD 3-Clause
"""

__version__ = '1.0.0'
