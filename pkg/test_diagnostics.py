#!/usr/bin/env python3
"""
Tests for the numerical self-checks

License: BSD 3-Clause
"""

import os
import sys
from unittest import TestCase, main as unittest_main
from unittest.mock import patch

import numpy as np

# Add repository root to path for imports
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from pkg.diagnostics import (DiagnosticResult, all_passed, check_gradient, check_haar,
                             check_invertibility, check_logdet, finite_difference_jacobian,
                             run_diagnostics)
from pkg.flow import CINN, ArchitectureSpec, standard_stages
from pkg.numerics import Tensor


def perturbed_model(spec: ArchitectureSpec, seed: int = 0) -> CINN:
    model = CINN(spec)
    rng = np.random.default_rng(seed)
    for param in model.parameters():
        param.assign(param.numpy() + 0.1 * rng.standard_normal(param.shape))
    return model


def vector_model() -> CINN:
    return perturbed_model(ArchitectureSpec((2,), (3,), standard_stages((2,), [2]),
                                            cond_widths=[8], cond_hidden=8, subnet_hidden=8))


def image_model() -> CINN:
    spec = ArchitectureSpec((2, 4, 4), (1, 4, 4), standard_stages((2, 4, 4), [1, 1]),
                            conditioning='conv', cond_widths=[4, 4], subnet_hidden=4)
    return perturbed_model(spec, seed=1)


class TestFiniteDifference(TestCase):
    """Central-difference Jacobian."""

    def test_linear_map(self):
        matrix = np.array([[1.0, 2.0], [3.0, 4.0], [0.0, -1.0]])
        jacobian = finite_difference_jacobian(lambda p: p @ matrix.T, np.array([0.3, -0.2]))
        np.testing.assert_allclose(jacobian, matrix, atol=1e-9)

    def test_nonlinear_map(self):
        jacobian = finite_difference_jacobian(np.sin, np.array([0.0, 1.0]))
        np.testing.assert_allclose(jacobian, np.diag(np.cos([0.0, 1.0])), atol=1e-9)


class TestChecks(TestCase):
    """Individual checks on small models."""

    def setUp(self):
        rng = np.random.default_rng(2)
        self.x = rng.standard_normal((6, 2))
        self.y = np.eye(3)[[0, 1, 2, 0, 1, 2]]

    def test_haar(self):
        result = check_haar()
        self.assertTrue(result.passed)
        self.assertLess(result.error, 1e-12)

    def test_invertibility(self):
        self.assertTrue(check_invertibility(vector_model(), self.x, self.y).passed)

    def test_broken_inverse_is_caught(self):
        model = vector_model()
        exact = model.inverse

        def off_by_a_little(z, y):
            return Tensor(exact(z, y).numpy() + 1e-3)

        with patch.object(model, 'inverse', side_effect=off_by_a_little):
            result = check_invertibility(model, self.x, self.y)
        self.assertFalse(result.passed)
        self.assertGreater(result.error, 5e-4)

    def test_logdet_vector(self):
        result = check_logdet(vector_model(), self.x, self.y)
        self.assertTrue(result.passed, str(result))

    def test_logdet_image(self):
        rng = np.random.default_rng(3)
        result = check_logdet(image_model(), rng.standard_normal((2, 2, 4, 4)),
                              rng.uniform(size=(2, 1, 4, 4)), max_samples=1)
        self.assertTrue(result.passed, str(result))

    def test_logdet_skips_large_models(self):
        result = check_logdet(vector_model(), self.x, self.y, max_dim=1)
        self.assertTrue(result.passed)
        self.assertIn('skipped', result.detail)

    def test_gradient(self):
        model = vector_model()
        before = model.state_dict()
        result = check_gradient(model, self.x, self.y, num_entries=12)
        self.assertTrue(result.passed, str(result))
        for name, value in model.state_dict().items():
            np.testing.assert_array_equal(value, before[name])


class TestReport(TestCase):
    """Result formatting and the combined run."""

    def test_str(self):
        self.assertTrue(str(DiagnosticResult('haar', True, 0.0, 1e-12)).startswith('✅ haar'))
        self.assertTrue(str(DiagnosticResult('logdet', False, 1.0, 1e-5)).startswith('❌'))

    def test_run_all(self):
        rng = np.random.default_rng(4)
        results = run_diagnostics(vector_model(), rng.standard_normal((4, 2)), np.eye(3)[[0, 1, 2, 0]])
        self.assertEqual([r.name for r in results], ['haar', 'invertibility', 'logdet', 'gradient'])
        self.assertTrue(all_passed(results), '\n'.join(map(str, results)))

    def test_all_passed(self):
        results = [DiagnosticResult('a', True, 0.0, 1.0), DiagnosticResult('b', False, 2.0, 1.0)]
        self.assertFalse(all_passed(results))
        self.assertTrue(all_passed(results[:1]))


if __name__ == '__main__':
    unittest_main()
