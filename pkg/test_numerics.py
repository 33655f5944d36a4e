#!/usr/bin/env python3
"""
Tests for the cINN numerics core

Covers tensor arithmetic, reverse-mode gradients, layers, Adam and the
seeded random streams.

License: BSD 3-Clause
"""

import math
import os
import sys
from unittest import TestCase, main as unittest_main

import numpy as np

# Add repository root to path for imports
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from pkg.errors import ConfigurationError, ContractViolation, NumericError, ShapeError
from pkg.numerics import (Adam, AdamState, BatchNorm, Conv2d, Linear, MultiStepSchedule,
                          Parameter, RngStreams, Tensor, adam_step, add, backward,
                          batch_normalize, concat, conv2d, exp, matmul, mean, no_grad,
                          reshape, split, take, tanh, tensor_sum, transpose)


class TestTensorOps(TestCase):
    """Forward values and error contracts of tensor operations."""

    def test_add(self):
        out = add([1.0, 2.0], [3.0, 4.0])
        np.testing.assert_array_equal(out.numpy(), [4.0, 6.0])

    def test_exp_of_zero(self):
        np.testing.assert_array_equal(exp([0.0]).numpy(), [1.0])

    def test_matmul_of_ones(self):
        out = matmul(np.ones((2, 3)), np.ones((3, 2)))
        np.testing.assert_array_equal(out.numpy(), np.full((2, 2), 3.0))

    def test_broadcast_row_vector(self):
        out = add(np.zeros((3, 2)), [1.0, 2.0])
        np.testing.assert_array_equal(out.numpy(), [[1, 2], [1, 2], [1, 2]])

    def test_shape_mismatch_names_both_shapes(self):
        with self.assertRaises(ShapeError) as ctx:
            add(np.zeros(3), np.zeros(4))
        self.assertIn('(3,)', str(ctx.exception))
        self.assertIn('(4,)', str(ctx.exception))

    def test_matmul_shape_mismatch(self):
        with self.assertRaises(ShapeError):
            matmul(np.ones((2, 3)), np.ones((2, 3)))

    def test_overflow_raises_numeric_error(self):
        with self.assertRaises(NumericError):
            exp([1000.0])

    def test_split_and_concat_inverse(self):
        x = np.arange(12.0).reshape(2, 6)
        a, b = split(x, [2, 4], axis=1)
        self.assertEqual(a.shape, (2, 2))
        np.testing.assert_array_equal(concat([a, b], axis=1).numpy(), x)

    def test_split_sizes_must_cover_axis(self):
        with self.assertRaises(ShapeError):
            split(np.zeros((2, 6)), [2, 2], axis=1)

    def test_reshape_transpose(self):
        x = np.arange(6.0)
        out = transpose(reshape(x, (2, 3)))
        np.testing.assert_array_equal(out.numpy(), x.reshape(2, 3).T)

    def test_take_permutes_channels(self):
        x = np.array([[10.0, 20.0, 30.0]])
        np.testing.assert_array_equal(take(x, [2, 0, 1], axis=1).numpy(), [[30, 10, 20]])

    def test_tensors_are_read_only(self):
        t = Tensor([1.0, 2.0])
        with self.assertRaises(ValueError):
            t.numpy()[0] = 5.0

    def test_conv2d_identity_kernel(self):
        x = np.random.default_rng(0).standard_normal((2, 1, 4, 4))
        kernel = np.zeros((1, 1, 3, 3))
        kernel[0, 0, 1, 1] = 1.0
        np.testing.assert_allclose(conv2d(x, kernel, padding=1).numpy(), x)

    def test_conv2d_stride_halves(self):
        out = conv2d(np.ones((1, 2, 8, 8)), np.ones((3, 2, 3, 3)), stride=2, padding=1)
        self.assertEqual(out.shape, (1, 3, 4, 4))

    def test_batch_normalize_statistics(self):
        x = np.random.default_rng(1).standard_normal((16, 3)) * 4.0 + 2.0
        out, mu, var = batch_normalize(x)
        np.testing.assert_allclose(out.numpy().mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.numpy().var(axis=0), 1.0, atol=1e-4)
        self.assertEqual(mu.shape, (3,))


class TestBackward(TestCase):
    """Gradients of the reverse pass."""

    def test_square(self):
        p = Parameter([3.0])
        backward(tensor_sum(p * p))
        np.testing.assert_allclose(p.grad, [6.0])

    def test_exp(self):
        p = Parameter([0.0, 1.0])
        backward(tensor_sum(exp(p)))
        np.testing.assert_allclose(p.grad, [1.0, math.e])

    def test_non_scalar_loss(self):
        p = Parameter([1.0, 2.0])
        with self.assertRaises(ContractViolation):
            backward(p * 2.0)

    def test_shared_parent_accumulates(self):
        p = Parameter([2.0])
        backward(tensor_sum(p * 3.0 + p * p))
        np.testing.assert_allclose(p.grad, [7.0])

    def test_broadcast_gradient_is_summed(self):
        bias = Parameter([0.0, 0.0])
        backward(tensor_sum(add(np.ones((5, 2)), bias)))
        np.testing.assert_allclose(bias.grad, [5.0, 5.0])

    def test_mean_tanh_gradient(self):
        p = Parameter([0.0, 0.0, 0.0, 0.0])
        backward(mean(tanh(p)))
        np.testing.assert_allclose(p.grad, np.full(4, 0.25))

    def test_no_grad_records_nothing(self):
        p = Parameter([1.0])
        with no_grad():
            out = p * 2.0
        self.assertFalse(out.requires_grad)

    def test_conv2d_gradient_matches_finite_difference(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((1, 2, 5, 5))
        w = Parameter(rng.standard_normal((2, 2, 3, 3)))
        backward(tensor_sum(tanh(conv2d(x, w, stride=2, padding=1))))
        h = 1e-6
        for idx in [(0, 0, 0, 0), (1, 1, 2, 1), (0, 1, 1, 2)]:
            plus, minus = w.data.copy(), w.data.copy()
            plus[idx] += h
            minus[idx] -= h
            f_plus = np.tanh(conv2d(x, plus, stride=2, padding=1).numpy()).sum()
            f_minus = np.tanh(conv2d(x, minus, stride=2, padding=1).numpy()).sum()
            self.assertAlmostEqual(w.grad[idx], (f_plus - f_minus) / (2 * h), places=6)

    def test_batch_normalize_gradient(self):
        rng = np.random.default_rng(4)
        x = Parameter(rng.standard_normal((6, 2)))
        weights = rng.standard_normal((6, 2))
        backward(tensor_sum(batch_normalize(x)[0] * weights))
        h = 1e-6
        plus, minus = x.data.copy(), x.data.copy()
        plus[2, 1] += h
        minus[2, 1] -= h
        numeric = ((batch_normalize(plus)[0].numpy() * weights).sum()
                   - (batch_normalize(minus)[0].numpy() * weights).sum()) / (2 * h)
        self.assertAlmostEqual(x.grad[2, 1], numeric, places=5)


class TestLayers(TestCase):
    """Modules, naming and state dicts."""

    def test_linear_shape_check(self):
        layer = Linear(3, 2, np.random.default_rng(0))
        self.assertEqual(layer(np.ones((4, 3))).shape, (4, 2))
        with self.assertRaises(ShapeError):
            layer(np.ones((4, 2)))

    def test_zero_init_outputs_zero(self):
        layer = Conv2d(2, 3, 3, np.random.default_rng(0), zero_init=True)
        np.testing.assert_array_equal(layer(np.ones((1, 2, 4, 4))).numpy(), 0.0)

    def test_batch_norm_running_stats(self):
        bn = BatchNorm(2)
        x = np.random.default_rng(2).standard_normal((32, 2)) + 5.0
        bn(x)
        self.assertTrue(np.all(bn.running_mean > 0.4))
        bn.eval()
        out = bn(x).numpy()
        self.assertEqual(out.shape, (32, 2))

    def test_state_dict_round_trip(self):
        a = Linear(3, 2, np.random.default_rng(0))
        b = Linear(3, 2, np.random.default_rng(1))
        b.load_state_dict(a.state_dict())
        np.testing.assert_array_equal(a.weight.numpy(), b.weight.numpy())

    def test_state_dict_includes_buffers(self):
        self.assertEqual(set(BatchNorm(2).state_dict()),
                         {'weight', 'bias', 'running_mean', 'running_var'})

    def test_state_dict_mismatch(self):
        layer = Linear(3, 2, np.random.default_rng(0))
        with self.assertRaises(ConfigurationError):
            layer.load_state_dict({'weight': np.zeros((3, 2))})


class TestAdam(TestCase):
    """Adam updates and the learning-rate schedule."""

    def test_zero_gradient_keeps_value(self):
        p = Parameter([1.5], name='p')
        p.grad = np.zeros(1)
        adam_step(AdamState(lr=0.1), [p])
        np.testing.assert_allclose(p.numpy(), [1.5])

    def test_first_step_moves_by_lr(self):
        p = Parameter([0.0], name='p')
        p.grad = np.ones(1)
        adam_step(AdamState(lr=0.1), [p])
        self.assertAlmostEqual(float(p.numpy()[0]), -0.1, places=6)

    def test_weight_decay_shrinks(self):
        p = Parameter([2.0], name='p')
        p.grad = np.zeros(1)
        adam_step(AdamState(lr=0.1, weight_decay=0.5), [p])
        self.assertLess(abs(float(p.numpy()[0])), 2.0)

    def test_step_before_backward(self):
        with self.assertRaises(ContractViolation):
            adam_step(AdamState(), [Parameter([1.0], name='p')])

    def test_step_clears_gradients(self):
        p = Parameter([1.0], name='p')
        p.grad = np.ones(1)
        opt = Adam([p], lr=0.01)
        opt.step()
        self.assertIsNone(p.grad)

    def test_duplicate_names_rejected(self):
        with self.assertRaises(ConfigurationError):
            Adam([Parameter([1.0], name='w'), Parameter([2.0], name='w')])

    def test_state_records_round_trip(self):
        p = Parameter([1.0, 2.0], name='w')
        opt = Adam([p], lr=0.01)
        p.grad = np.array([0.5, -0.5])
        opt.step()
        other = Adam([Parameter([1.0, 2.0], name='w')], lr=0.01)
        other.load_state_records(opt.state_records())
        self.assertEqual(other.state.step, 1)
        np.testing.assert_array_equal(other.state.exp_avg['w'], opt.state.exp_avg['w'])

    def test_schedule(self):
        schedule = MultiStepSchedule(1e-3, [10, 20], factor=10)
        self.assertAlmostEqual(schedule.lr_at(9), 1e-3)
        self.assertAlmostEqual(schedule.lr_at(10), 1e-4)
        self.assertAlmostEqual(schedule.lr_at(25), 1e-5)

    def test_schedule_rejects_unsorted(self):
        with self.assertRaises(ConfigurationError):
            MultiStepSchedule(1e-3, [20, 10])


class TestRngStreams(TestCase):
    """Named random streams."""

    def test_same_name_same_values(self):
        a = RngStreams(7).generator('batch', 3).standard_normal(5)
        b = RngStreams(7).generator('batch', 3).standard_normal(5)
        np.testing.assert_array_equal(a, b)

    def test_streams_are_independent(self):
        streams = RngStreams(7)
        a = streams.generator('batch', 0).standard_normal(5)
        b = streams.generator('noise', 0).standard_normal(5)
        c = streams.generator('batch', 1).standard_normal(5)
        self.assertFalse(np.array_equal(a, b))
        self.assertFalse(np.array_equal(a, c))


if __name__ == '__main__':
    unittest_main()
