#!/usr/bin/env python3
"""
Tests for Haar wavelet downsampling

License: BSD 3-Clause
"""

import os
import sys
from unittest import TestCase, main as unittest_main

import numpy as np

# Add repository root to path for imports
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from pkg.errors import ShapeError
from pkg.flow import DownsampleStage
from pkg.numerics import Parameter, Tensor, backward, tensor_sum
from pkg.wavelet import (HAAR_KERNEL, haar_down, haar_up, kernel_orthogonality_error,
                         squeeze_down, squeeze_up)


class TestHaar(TestCase):
    """Haar transform values, inverse and shape contracts."""

    def test_constant_input(self):
        out = haar_down(np.ones((1, 4, 4))).numpy()
        self.assertEqual(out.shape, (4, 2, 2))
        np.testing.assert_allclose(out[0], 2.0)
        np.testing.assert_allclose(out[1:], 0.0)

    def test_single_block(self):
        out = haar_down(np.array([[[1.0, 2.0], [3.0, 4.0]]])).numpy()
        np.testing.assert_allclose(out.reshape(-1), [5.0, -1.0, -2.0, 0.0])

    def test_up_of_constant_coefficients(self):
        coeffs = np.zeros((4, 3, 3))
        coeffs[0] = 2.0
        np.testing.assert_allclose(haar_up(coeffs).numpy(), np.ones((1, 6, 6)))

    def test_up_of_single_block(self):
        coeffs = np.array([5.0, -1.0, -2.0, 0.0]).reshape(4, 1, 1)
        np.testing.assert_allclose(haar_up(coeffs).numpy(), [[[1.0, 2.0], [3.0, 4.0]]])

    def test_round_trip_and_energy(self):
        x = np.random.default_rng(0).standard_normal((3, 2, 8, 6))
        down = haar_down(x).numpy()
        self.assertEqual(down.shape, (3, 8, 4, 3))
        np.testing.assert_allclose(haar_up(down).numpy(), x, atol=1e-12)
        self.assertAlmostEqual((down ** 2).sum(), (x ** 2).sum(), places=9)

    def test_channel_grouping(self):
        x = np.zeros((2, 2, 2))
        x[1] = 1.0
        out = haar_down(x).numpy()
        # average channels first: channel 1 of the input lands in channel 1
        np.testing.assert_allclose(out[:2, 0, 0], [0.0, 2.0])

    def test_kernel_is_orthogonal(self):
        self.assertLess(kernel_orthogonality_error(HAAR_KERNEL), 1e-15)

    def test_odd_dimensions(self):
        with self.assertRaises(ShapeError):
            haar_down(np.ones((1, 3, 4)))

    def test_bad_channel_count(self):
        with self.assertRaises(ShapeError):
            haar_up(np.ones((3, 2, 2)))

    def test_jacobian_has_unit_determinant(self):
        basis = np.eye(16).reshape(16, 1, 4, 4)
        jacobian = haar_down(basis).numpy().reshape(16, 16).T
        sign, logdet = np.linalg.slogdet(jacobian)
        self.assertNotEqual(sign, 0)
        self.assertAlmostEqual(logdet, 0.0, places=12)

    def test_stage_adds_no_logdet(self):
        stage = DownsampleStage((1, 4, 4))
        out, logdet, split_off = stage.forward(Tensor(np.ones((2, 1, 4, 4))), None)
        self.assertEqual(out.shape, (2, 4, 2, 2))
        self.assertIsNone(logdet)
        self.assertIsNone(split_off)

    def test_gradient_is_adjoint(self):
        x = Parameter(np.random.default_rng(1).standard_normal((1, 1, 4, 4)))
        weights = np.random.default_rng(2).standard_normal((1, 4, 2, 2))
        backward(tensor_sum(haar_down(x) * weights))
        np.testing.assert_allclose(x.grad, haar_up(weights).numpy(), atol=1e-12)


class TestSqueeze(TestCase):
    """Naive space-to-depth reshape."""

    def test_round_trip(self):
        x = np.random.default_rng(3).standard_normal((2, 1, 4, 4))
        np.testing.assert_allclose(squeeze_up(squeeze_down(x)).numpy(), x)

    def test_moves_pixels_without_mixing(self):
        x = np.array([[[1.0, 2.0], [3.0, 4.0]]])
        np.testing.assert_allclose(squeeze_down(x).numpy().reshape(-1), [1.0, 2.0, 3.0, 4.0])


if __name__ == '__main__':
    unittest_main()
