#!/usr/bin/env python3
"""
Tests for training: config, batches, checkpoints, the trainer and ablations

License: BSD 3-Clause
"""

import csv
import json
import os
import struct
import sys
import tempfile
import threading
from pathlib import Path
from unittest import TestCase, main as unittest_main
from unittest.mock import patch

import numpy as np

# Add repository root to path for imports
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from pkg.datasets.tasks import Dataset, ToyTaskSpec, generate_dataset
from pkg.errors import (ArchitectureMismatchError, CheckpointFormatError,
                        CheckpointVersionError, ConfigurationError, ContractViolation,
                        TrainingDivergedError)
from pkg.flow import CINN, ArchitectureConfig, ArchitectureSpec, standard_stages
from pkg.numerics import Adam
from pkg.training import (BatchLoader, RunConfig, TrainConfig, decode_checkpoint,
                          dequantize, divergence_threshold, encode_checkpoint,
                          load_checkpoint, load_config, make_batch, restore,
                          save_checkpoint, save_config, train)
from pkg.training.ablation import ABLATIONS, run_ablations
from pkg.training.checkpoint import Checkpoint
from pkg.training.data import BatchWorker


def small_run(steps: int = 6, **training) -> RunConfig:
    options = dict(batch_size=16, steps=steps, lr=1e-3, noise=False, log_every=2)
    options.update(training)
    return RunConfig(
        task=ToyTaskSpec(task='affine-gaussian', samples=64, test_samples=32, seed=1),
        architecture=ArchitectureConfig(blocks_per_level=[2], cond_width=4, cond_hidden=8,
                                        subnet_hidden=8),
        training=TrainConfig(**options),
    )


def small_model(run: RunConfig, data: Dataset) -> CINN:
    return CINN(run.architecture_spec(data.input_shape, data.condition_shape))


class TestConfig(TestCase):
    """YAML run files and their validation."""

    def test_defaults(self):
        config = TrainConfig()
        self.assertEqual(config.batch_size, 64)
        self.assertAlmostEqual(config.noise_sigma, 2.0 / 256.0)
        self.assertEqual(config.effective_noise_sigma, config.noise_sigma)
        self.assertEqual(TrainConfig(noise=False).effective_noise_sigma, 0.0)

    def test_invalid_values(self):
        with self.assertRaises(ConfigurationError):
            TrainConfig(lr=0.0)
        with self.assertRaises(ConfigurationError):
            TrainConfig(steps=100, milestones=[50, 40])
        with self.assertRaises(ConfigurationError):
            TrainConfig(steps=100, milestones=[150])

    def test_unknown_keys_and_sections(self):
        with self.assertRaises(ConfigurationError):
            TrainConfig.from_dict({'momentum': 0.9})
        with self.assertRaises(ConfigurationError):
            RunConfig.from_dict({'optimizer': {}})

    def test_yaml_round_trip(self):
        run = small_run(milestones=[3])
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'run.yaml'
            save_config(run, path)
            again = load_config(path)
        self.assertEqual(again.to_dict(), run.to_dict())

    def test_invalid_yaml(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'bad.yaml'
            path.write_text("training: [unclosed\n")
            with self.assertRaises(ConfigurationError):
                load_config(path)

    def test_missing_file(self):
        with self.assertRaises(FileNotFoundError):
            load_config('/nonexistent/run.yaml')

    def test_example_configs_load(self):
        config_dir = Path(__file__).parent / 'cmd' / 'cinn' / 'configs'
        for path in sorted(config_dir.glob('*.yaml')):
            run = load_config(path)
            self.assertGreater(run.training.steps, 0, path.name)


class TestBatches(TestCase):
    """Dequantisation and the deterministic batch loader."""

    def setUp(self):
        self.data = generate_dataset(ToyTaskSpec(task='affine-gaussian', samples=50, seed=2))

    def test_zero_sigma_is_identity(self):
        x = np.arange(6.0).reshape(3, 2)
        np.testing.assert_array_equal(dequantize(x, 0.0, np.random.default_rng(0)), x)

    def test_negative_sigma(self):
        with self.assertRaises(ContractViolation):
            dequantize(np.zeros(2), -0.1, np.random.default_rng(0))

    def test_noise_scale(self):
        noisy = dequantize(np.zeros(1_000_000), 0.5, np.random.default_rng(0))
        self.assertAlmostEqual(float(noisy.std()), 0.5, delta=0.005)
        self.assertAlmostEqual(float(noisy.mean()), 0.0, delta=0.005)

    def test_batches_are_reproducible(self):
        a = make_batch(self.data, 7, 8, seed=3, noise_sigma=0.01)
        b = make_batch(self.data, 7, 8, seed=3, noise_sigma=0.01)
        np.testing.assert_array_equal(a.x, b.x)
        c = make_batch(self.data, 8, 8, seed=3, noise_sigma=0.01)
        self.assertFalse(np.array_equal(a.x, c.x))

    def test_workers_match_serial_order(self):
        serial = list(BatchLoader(self.data, 8, seed=1, noise_sigma=0.01, stop=9))
        threaded = list(BatchLoader(self.data, 8, seed=1, noise_sigma=0.01,
                                    num_workers=3, stop=9))
        self.assertEqual([b.step for b in threaded], list(range(9)))
        for a, b in zip(serial, threaded):
            np.testing.assert_array_equal(a.x, b.x)
            np.testing.assert_array_equal(a.y, b.y)


class TestCheckpoint(TestCase):
    """Binary checkpoint format and restoring models."""

    def setUp(self):
        self.run = small_run()
        self.data = generate_dataset(self.run.task)
        self.model = small_model(self.run, self.data)
        for param in self.model.parameters():
            param.assign(param.numpy() + 0.1)
        self.tmp = tempfile.TemporaryDirectory()
        self.path = Path(self.tmp.name) / 'model.ckpt'

    def tearDown(self):
        self.tmp.cleanup()

    def test_round_trip_is_bit_identical(self):
        save_checkpoint(self.path, self.model, {'step': 3})
        model, metadata = restore(self.path)
        self.assertEqual(metadata['step'], 3)
        np.testing.assert_array_equal(model.log_prob(self.data.x, self.data.y),
                                      self.model.log_prob(self.data.x, self.data.y))
        self.assertFalse(Path(str(self.path) + '.tmp').exists())

    def test_optimizer_state(self):
        optimizer = Adam(self.model.parameters(), lr=0.01)
        for param in self.model.parameters():
            param.grad = np.ones(param.shape)
        optimizer.step()
        save_checkpoint(self.path, self.model, {}, optimizer)
        fresh = Adam(self.model.parameters(), lr=0.01)
        restore(self.path, self.model, fresh)
        self.assertEqual(fresh.state.step, 1)

    def test_truncated_file(self):
        blob = encode_checkpoint(Checkpoint(self.model.spec, {}, self.model.state_dict()))
        with self.assertRaises(CheckpointFormatError) as ctx:
            decode_checkpoint(blob[:len(blob) // 2])
        self.assertGreater(ctx.exception.offset, 0)
        self.assertLessEqual(ctx.exception.offset, len(blob) // 2)

    def test_trailing_bytes(self):
        blob = encode_checkpoint(Checkpoint(self.model.spec, {}, {}))
        with self.assertRaises(CheckpointFormatError):
            decode_checkpoint(blob + b'\x00')

    def test_bad_magic(self):
        with self.assertRaises(CheckpointFormatError) as ctx:
            decode_checkpoint(b'XXXX' + b'\x00' * 16)
        self.assertEqual(ctx.exception.offset, 0)

    def test_version_mismatch(self):
        blob = encode_checkpoint(Checkpoint(self.model.spec, {}, {}))
        blob = blob[:4] + struct.pack('<I', 99) + blob[8:]
        with self.assertRaises(CheckpointVersionError):
            decode_checkpoint(blob)

    def test_missing_file(self):
        with self.assertRaises(FileNotFoundError):
            load_checkpoint(Path(self.tmp.name) / 'absent.ckpt')

    def test_architecture_mismatch_names_stage(self):
        save_checkpoint(self.path, self.model)
        spec = self.model.spec.to_dict()
        spec['stages'] = [s for s in spec['stages'] if s['type'] != 'permute']
        other = CINN(ArchitectureSpec.from_dict(spec))
        with self.assertRaises(ArchitectureMismatchError) as ctx:
            restore(self.path, other)
        self.assertEqual(ctx.exception.stage_index, 1)


class TestTrainer(TestCase):
    """The training loop, its logs and divergence handling."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out = Path(self.tmp.name) / 'run.ckpt'

    def tearDown(self):
        self.tmp.cleanup()

    def test_metrics_and_checkpoint(self):
        run = small_run(steps=6, checkpoint_every=2)
        data = generate_dataset(run.task)
        model = small_model(run, data)
        result = train(data, run.training, model, out_path=self.out, metadata=run.to_dict())
        self.assertEqual(result.steps, 6)
        self.assertEqual(len(result.history), 6)
        with open(self.out.with_suffix('.csv')) as f:
            rows = list(csv.DictReader(f))
        self.assertEqual([int(r['step']) for r in rows], list(range(6)))
        self.assertIn('nll_nats_per_dim', rows[0])
        restored, metadata = restore(self.out)
        self.assertEqual(metadata['step'], 6)
        self.assertEqual(metadata['task']['task'], 'affine-gaussian')
        np.testing.assert_array_equal(restored.log_prob(data.x, data.y),
                                      model.log_prob(data.x, data.y))

    def test_identical_seeds_give_identical_runs(self):
        run = small_run(steps=5, noise=True, noise_sigma=0.01)
        data = generate_dataset(run.task)
        first_path = Path(self.tmp.name) / 'first.ckpt'
        second_path = Path(self.tmp.name) / 'second.ckpt'
        first = train(data, run.training, small_model(run, data), out_path=first_path,
                      metadata=run.to_dict())
        second = train(data, run.training, small_model(run, data), out_path=second_path,
                       metadata=run.to_dict())
        self.assertEqual([r['cml'] for r in first.history], [r['cml'] for r in second.history])
        self.assertEqual(first_path.read_bytes(), second_path.read_bytes())
        records = load_checkpoint(first_path).records
        self.assertTrue(any(name.startswith('adam.') for name in records))

    def test_identical_seeds_give_identical_conv_checkpoints(self):
        run = RunConfig(
            task=ToyTaskSpec(task='toy-colorization', image_size=8, samples=16,
                             test_samples=4, seed=3),
            architecture=ArchitectureConfig(conditioning='conv', blocks_per_level=[1, 1],
                                            cond_width=4, subnet_hidden=4),
            training=TrainConfig(batch_size=4, steps=3, lr=1e-3, log_every=1, num_workers=2),
        )
        data = generate_dataset(run.task)
        paths = [Path(self.tmp.name) / f'conv{i}.ckpt' for i in range(2)]
        for path in paths:
            train(data, run.training, small_model(run, data), out_path=path)
        self.assertEqual(paths[0].read_bytes(), paths[1].read_bytes())
        records = load_checkpoint(paths[0]).records
        self.assertTrue(any('running' in name for name in records))

    def test_workers_do_not_change_the_curve(self):
        run = small_run(steps=4)
        data = generate_dataset(run.task)
        serial = train(data, run.training, small_model(run, data))
        threaded_config = TrainConfig(**dict(run.training.to_dict(), num_workers=2))
        threaded = train(data, threaded_config, small_model(run, data))
        self.assertEqual([r['cml'] for r in serial.history],
                         [r['cml'] for r in threaded.history])

    def test_frozen_conditioning_is_unchanged(self):
        run = small_run(steps=3, freeze_conditioning=True)
        data = generate_dataset(run.task)
        model = small_model(run, data)
        before = {n: p.numpy().copy() for n, p in model.conditioning.named_parameters()}
        train(data, run.training, model)
        for name, param in model.conditioning.named_parameters():
            np.testing.assert_array_equal(param.numpy(), before[name])

    def test_non_finite_loss_aborts_with_report(self):
        run = small_run(steps=4)
        data = Dataset(np.full((32, 1), 1e200), np.zeros((32, 1)))
        model = small_model(run, data)
        initial = model.state_dict()
        with self.assertRaises(TrainingDivergedError) as ctx:
            train(data, run.training, model, out_path=self.out)
        self.assertEqual(ctx.exception.report['step'], 0)
        report = json.loads(self.out.with_suffix('.divergence.json').read_text())
        self.assertEqual(report['step'], 0)
        for name, value in model.state_dict().items():
            np.testing.assert_array_equal(value, initial[name])

    def test_divergence_threshold(self):
        self.assertAlmostEqual(divergence_threshold(2.0, 10.0), 22.0)
        self.assertAlmostEqual(divergence_threshold(-3.0, 10.0), 27.0)
        self.assertAlmostEqual(divergence_threshold(0.5, 10.0), 10.5)
        for reference in (0.01, 0.5, 2.0, 40.0):
            self.assertGreaterEqual(divergence_threshold(reference, 10.0), 10.0 * reference)

    def test_workers_stop_when_a_step_fails(self):
        run = small_run(steps=20, num_workers=2)
        data = generate_dataset(run.task)
        before = {t for t in threading.enumerate() if isinstance(t, BatchWorker)}
        with patch('pkg.training.trainer.cml_loss', side_effect=RuntimeError('boom')):
            with self.assertRaises(RuntimeError):
                train(data, run.training, small_model(run, data))
        alive = {t for t in threading.enumerate()
                 if isinstance(t, BatchWorker) and t.is_alive()} - before
        self.assertEqual(alive, set())


class TestAblations(TestCase):
    """Ablation variants train and report."""

    def test_variants(self):
        run = small_run(steps=3)
        train_data = generate_dataset(run.task, 'train')
        test_data = generate_dataset(run.task, 'test')
        results = run_ablations(run, train_data, test_data, ['full', 'no-permutations'])
        self.assertEqual([r.name for r in results], ['full', 'no-permutations'])
        for result in results:
            self.assertFalse(result.diverged)
            self.assertTrue(np.isfinite(result.test_nll))
            self.assertIn(result.name, result.summary())

    def test_unknown_variant(self):
        run = small_run(steps=2)
        data = generate_dataset(run.task)
        with self.assertRaises(ConfigurationError):
            run_ablations(run, data, data, ['no-such-thing'])

    def test_names(self):
        self.assertEqual(set(ABLATIONS), {'full', 'no-noise', 'no-permutations',
                                          'no-clamping', 'naive-reshape'})


if __name__ == '__main__':
    unittest_main()
