#!/usr/bin/env python3
"""
cINN Diagnostics - Self Checks
------------------------------
Numerical checks a model can run on itself:

- invertibility: x -> z -> x and z -> x -> z round trips
- logdet: analytic log|det J| against a central-difference Jacobian
- gradient: backpropagated loss gradient against central differences
- haar: orthogonality and exact reconstruction of the wavelet

Flow checks run in eval mode, where batch norm uses its running statistics
and every sample is mapped independently.

License: BSD 3-Clause
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from pkg.errors import ContractViolation
from pkg.flow.cinn import CINN, inference
from pkg.flow.loss import cml_loss
from pkg.numerics.rng import RngStreams
from pkg.numerics.tensor import backward, no_grad
from pkg.wavelet.haar import HAAR_KERNEL, haar_down, haar_up, kernel_orthogonality_error

logger = logging.getLogger(__name__)

GRAD_FLOOR = 1e-4


@dataclass
class DiagnosticResult:
    name: str
    passed: bool
    error: float
    tolerance: float
    detail: str = ''

    def __str__(self) -> str:
        mark = '✅' if self.passed else '❌'
        text = f"{mark} {self.name}: error {self.error:.3e} (tolerance {self.tolerance:.0e})"
        return f"{text} {self.detail}".rstrip()


def finite_difference_jacobian(f: Callable[[np.ndarray], np.ndarray], x0: np.ndarray,
                               h: float = 1e-5) -> np.ndarray:
    """
    Central-difference Jacobian of a batched map.

    ``f`` takes a (M, d) array of points and returns (M, k); all 2d
    perturbed points are evaluated in one call.

    Returns:
        (k, d) Jacobian
    """
    x0 = np.asarray(x0, dtype=np.float64).reshape(-1)
    dim = len(x0)
    steps = h * np.eye(dim)
    values = f(np.concatenate([x0 + steps, x0 - steps]))
    return ((values[:dim] - values[dim:]) / (2.0 * h)).T


def check_invertibility(model: CINN, x, y, tolerance: float = 1e-6,
                        seed: int = 0) -> DiagnosticResult:
    """max |g(f(x)) - x| and max |f(g(z)) - z| for random z."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    with inference(model):
        z = model.forward(x, y).z
        x_back = model.inverse(z, y).numpy()
        z_rand = RngStreams(seed).generator('diagnostics').standard_normal((len(x), model.dim))
        z_back = model.forward(model.inverse(z_rand, y), y).z.numpy()
    error = max(float(np.abs(x_back - x).max()), float(np.abs(z_back - z_rand).max()))
    return DiagnosticResult('invertibility', error < tolerance, error, tolerance,
                            f"({len(x)} samples)")


def check_logdet(model: CINN, x, y, tolerance: float = 1e-5, h: float = 1e-5,
                 max_samples: int = 4, max_dim: int = 1024) -> DiagnosticResult:
    """Analytic log|det J| against slogdet of the finite-difference Jacobian."""
    if model.dim > max_dim:
        return DiagnosticResult('logdet', True, 0.0, tolerance,
                                f"(skipped: dimension {model.dim} > {max_dim})")
    x = np.asarray(x, dtype=np.float64)[:max_samples]
    y = np.asarray(y, dtype=np.float64)[:max_samples]
    shape = model.flow.input_shape
    error = 0.0
    with inference(model):
        analytic = model.forward(x, y).logdet.numpy()
        for i in range(len(x)):
            ys = np.repeat(y[i:i + 1], 2 * model.dim, axis=0)

            def latent(points: np.ndarray) -> np.ndarray:
                return model.forward(points.reshape((-1,) + shape), ys).z.numpy()

            jacobian = finite_difference_jacobian(latent, x[i], h)
            sign, numeric = np.linalg.slogdet(jacobian)
            if sign == 0:
                return DiagnosticResult('logdet', False, float('inf'), tolerance,
                                        f"(singular Jacobian at sample {i})")
            error = max(error, abs(numeric - float(analytic[i])))
    return DiagnosticResult('logdet', error < tolerance, error, tolerance,
                            f"({len(x)} samples, dimension {model.dim})")


def check_gradient(model: CINN, x, y, tolerance: float = 1e-4, h: float = 1e-5,
                   num_entries: int = 24, seed: int = 0) -> DiagnosticResult:
    """
    Relative error of dL/dtheta on randomly chosen parameter entries.

    Entries with a non-zero analytic gradient are preferred. Runs in the
    model's current mode; parameters and buffers are restored afterwards.
    """
    params = [p for p in model.parameters() if p.requires_grad]
    if not params:
        raise ContractViolation("no trainable parameters to check")
    snapshot = model.state_dict()
    for p in params:
        p.grad = None
    backward(cml_loss(x, y, model).loss)
    analytic = {id(p): (p.grad.copy() if p.grad is not None else np.zeros(p.shape)) for p in params}
    for p in params:
        p.grad = None

    candidates = [(p, idx) for p in params for idx in np.ndindex(p.shape)]
    nonzero = [c for c in candidates if analytic[id(c[0])][c[1]] != 0.0]
    pool = nonzero if len(nonzero) >= num_entries else candidates
    rng = RngStreams(seed).generator('diagnostics', 1)
    chosen = [pool[i] for i in rng.choice(len(pool), size=min(num_entries, len(pool)), replace=False)]

    def loss_at(p, idx, delta: float) -> float:
        values = p.data.copy()
        values[idx] += delta
        p.assign(values)
        with no_grad():
            return cml_loss(x, y, model).cml

    error = 0.0
    try:
        for p, idx in chosen:
            original = p.data.copy()
            numeric = (loss_at(p, idx, h) - loss_at(p, idx, -h)) / (2.0 * h)
            p.assign(original)
            exact = float(analytic[id(p)][idx])
            scale = max(abs(exact), abs(numeric), GRAD_FLOOR)
            error = max(error, abs(exact - numeric) / scale)
    finally:
        model.load_state_dict(snapshot)
    return DiagnosticResult('gradient', error < tolerance, error, tolerance,
                            f"({len(chosen)} entries)")


def check_haar(seed: int = 0, tolerance: float = 1e-12) -> DiagnosticResult:
    """Kernel orthogonality and reconstruction of a random image batch."""
    x = RngStreams(seed).generator('diagnostics', 2).standard_normal((2, 3, 8, 8))
    down = haar_down(x).numpy()
    error = max(kernel_orthogonality_error(HAAR_KERNEL),
                float(np.abs(haar_up(down).numpy() - x).max()),
                abs(float((down ** 2).sum() / (x ** 2).sum()) - 1.0))
    return DiagnosticResult('haar', error < tolerance, error, tolerance)


def run_diagnostics(model: CINN, x, y, seed: int = 0,
                    gradient_batch: Optional[int] = 8) -> List[DiagnosticResult]:
    """All checks on one batch; the gradient check uses the first ``gradient_batch`` rows."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    gx = x if gradient_batch is None else x[:gradient_batch]
    gy = y if gradient_batch is None else y[:gradient_batch]
    results = [
        check_haar(seed),
        check_invertibility(model, x, y, seed=seed),
        check_logdet(model, x, y),
        check_gradient(model, gx, gy, seed=seed),
    ]
    for result in results:
        log = logger.info if result.passed else logger.warning
        log(f"Diagnostic {result.name}: {'pass' if result.passed else 'FAIL'} "
            f"(error {result.error:.3e})")
    return results


def all_passed(results: List[DiagnosticResult]) -> bool:
    return all(r.passed for r in results)
