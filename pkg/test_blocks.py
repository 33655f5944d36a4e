#!/usr/bin/env python3
"""
Tests for conditional coupling blocks and channel permutations

License: BSD 3-Clause
"""

import math
import os
import sys
from unittest import TestCase, main as unittest_main

import numpy as np

# Add repository root to path for imports
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from pkg.blocks import (ChannelPermutation, ConditionalCouplingBlock, ccb_forward,
                        ccb_inverse, permute)
from pkg.diagnostics import finite_difference_jacobian
from pkg.errors import ConditionShapeError, ConfigurationError, ContractViolation, ShapeError
from pkg.numerics import backward, tensor_sum


def hand_block() -> ConditionalCouplingBlock:
    """Unclamped 2-channel block with constant s1=ln 2, t1=0.5, s2=0, t2=-1."""
    block = ConditionalCouplingBlock(2, (), np.random.default_rng(0), kind='dense',
                                     hidden=4, clamp=False)
    block.subnet1.net.layers[-1].bias.assign([math.log(2.0), 0.5])
    block.subnet2.net.layers[-1].bias.assign([0.0, -1.0])
    return block


class TestCouplingBlock(TestCase):
    """Forward, inverse and log-determinant of the coupling block."""

    def setUp(self):
        self.rng = np.random.default_rng(42)

    def test_fresh_block_is_identity(self):
        block = ConditionalCouplingBlock(4, (3,), self.rng)
        u = self.rng.standard_normal((5, 4))
        v, logdet = ccb_forward(u, self.rng.standard_normal((5, 3)), block)
        np.testing.assert_allclose(v.numpy(), u)
        np.testing.assert_allclose(logdet.numpy(), 0.0)

    def test_hand_example_forward(self):
        v, logdet = ccb_forward(np.array([[1.0, 2.0]]), None, hand_block())
        np.testing.assert_allclose(v.numpy(), [[2.5, 1.0]])
        np.testing.assert_allclose(logdet.numpy(), [math.log(2.0)])

    def test_hand_example_inverse(self):
        u, logdet = ccb_inverse(np.array([[2.5, 1.0]]), None, hand_block())
        np.testing.assert_allclose(u.numpy(), [[1.0, 2.0]])
        np.testing.assert_allclose(logdet.numpy(), [-math.log(2.0)])

    def _randomise(self, block):
        for param in block.parameters():
            param.assign(param.numpy() + 0.3 * self.rng.standard_normal(param.shape))

    def test_dense_round_trip(self):
        block = ConditionalCouplingBlock(5, (3,), self.rng, hidden=16)
        self._randomise(block)
        u = self.rng.standard_normal((100, 5))
        c = self.rng.standard_normal((100, 3))
        v, logdet = block.forward(u, c)
        u_back, inv_logdet = block.inverse(v, c)
        np.testing.assert_allclose(u_back.numpy(), u, atol=1e-8)
        np.testing.assert_allclose(inv_logdet.numpy(), -logdet.numpy(), atol=1e-8)

    def _jacobian(self, block, u, c):
        def f(points):
            return block.forward(points, np.repeat(c[None], len(points), axis=0))[0].numpy()
        return finite_difference_jacobian(f, u)

    def test_logdet_matches_brute_force_jacobian(self):
        for dim in (2, 5, 12):
            block = ConditionalCouplingBlock(dim, (3,), self.rng, hidden=16)
            self._randomise(block)
            for _ in range(3):
                u = self.rng.standard_normal(dim)
                c = self.rng.standard_normal(3)
                jacobian = self._jacobian(block, u, c)
                sign, expected = np.linalg.slogdet(jacobian)
                self.assertGreater(sign, 0)
                _, logdet = block.forward(u[None], c[None])
                self.assertAlmostEqual(float(logdet.numpy()[0]), expected, delta=1e-6)

    def test_jacobian_is_triangular(self):
        block = ConditionalCouplingBlock(6, (2,), self.rng, hidden=16)
        self._randomise(block)
        len1 = block.split_sizes[0]
        jacobian = self._jacobian(block, self.rng.standard_normal(6), self.rng.standard_normal(2))
        first = jacobian[:len1, :len1]
        np.testing.assert_allclose(first - np.diag(np.diag(first)), 0.0, atol=1e-9)
        self.assertGreater(np.abs(jacobian[:len1, len1:]).max(), 1e-6)

    def test_conv_round_trip_in_eval_mode(self):
        block = ConditionalCouplingBlock(4, (2, 4, 4), self.rng, kind='conv', hidden=8)
        self._randomise(block)
        block.eval()
        u = self.rng.standard_normal((3, 4, 4, 4))
        c = self.rng.standard_normal((3, 2, 4, 4))
        v, _ = block.forward(u, c)
        u_back, _ = block.inverse(v, c)
        np.testing.assert_allclose(u_back.numpy(), u, atol=1e-10)

    def test_single_channel_block(self):
        block = ConditionalCouplingBlock(1, (2,), self.rng, hidden=8)
        self._randomise(block)
        u = self.rng.standard_normal((4, 1))
        c = self.rng.standard_normal((4, 2))
        v, _ = block.forward(u, c)
        np.testing.assert_allclose(block.inverse(v, c)[0].numpy(), u, atol=1e-10)

    def test_clamp_bounds_scales(self):
        block = ConditionalCouplingBlock(2, (), self.rng, hidden=4, gamma_init=0.1)
        block.subnet1.net.layers[-1].bias.assign([50.0, 0.0])
        s1, _ = block.scales(np.ones((1, 2)))
        self.assertLessEqual(float(np.abs(s1.numpy()).max()), 0.1 + 1e-12)

    def test_condition_changes_output(self):
        block = ConditionalCouplingBlock(2, (1,), self.rng, hidden=8)
        self._randomise(block)
        u = np.ones((1, 2))
        a, _ = block.forward(u, np.array([[0.0]]))
        b, _ = block.forward(u, np.array([[1.0]]))
        self.assertFalse(np.allclose(a.numpy(), b.numpy()))

    def test_condition_shape_mismatch(self):
        block = ConditionalCouplingBlock(2, (3,), self.rng)
        with self.assertRaises(ConditionShapeError):
            block.forward(np.ones((2, 2)), np.ones((2, 4)))
        with self.assertRaises(ConditionShapeError):
            block.forward(np.ones((2, 2)), None)

    def test_input_shape_mismatch(self):
        block = ConditionalCouplingBlock(2, (), self.rng)
        with self.assertRaises(ShapeError):
            block.forward(np.ones((2, 3)))

    def test_unknown_kind(self):
        with self.assertRaises(ConfigurationError):
            ConditionalCouplingBlock(2, (), self.rng, kind='spline')

    def test_gradients_reach_subnetworks(self):
        block = ConditionalCouplingBlock(2, (1,), self.rng, hidden=8)
        v, logdet = block.forward(self.rng.standard_normal((4, 2)), np.ones((4, 1)))
        backward(tensor_sum(v * v) - tensor_sum(logdet))
        self.assertIsNotNone(block.subnet1.net.layers[-1].weight.grad)
        self.assertIsNotNone(block.clamp1.gamma.grad)


class TestPermutation(TestCase):
    """Fixed channel permutations."""

    def test_identity(self):
        x = np.arange(6.0).reshape(2, 3)
        np.testing.assert_array_equal(permute(x, ChannelPermutation.identity(3)).numpy(), x)

    def test_example_permutation(self):
        p = ChannelPermutation([2, 0, 1])
        x = np.array([[1.0, 2.0, 3.0]])
        out = permute(x, p, 'fwd')
        np.testing.assert_array_equal(out.numpy(), [[3.0, 1.0, 2.0]])
        np.testing.assert_array_equal(permute(out, p, 'inv').numpy(), x)

    def test_random_is_seeded(self):
        a = ChannelPermutation.random(10, seed=3).perm
        b = ChannelPermutation.random(10, seed=3).perm
        np.testing.assert_array_equal(a, b)
        self.assertEqual(sorted(a.tolist()), list(range(10)))

    def test_size_mismatch(self):
        with self.assertRaises(ShapeError):
            ChannelPermutation.identity(3).forward(np.ones((1, 4)))

    def test_not_a_permutation(self):
        with self.assertRaises(ContractViolation):
            ChannelPermutation([0, 0, 1])

    def test_bad_direction(self):
        with self.assertRaises(ContractViolation):
            permute(np.ones((1, 2)), ChannelPermutation.identity(2), 'sideways')

    def test_table_is_checkpointed(self):
        p = ChannelPermutation.random(5, seed=1)
        q = ChannelPermutation.identity(5)
        q.load_state_dict(p.state_dict())
        np.testing.assert_array_equal(q.perm, p.perm)


if __name__ == '__main__':
    unittest_main()
