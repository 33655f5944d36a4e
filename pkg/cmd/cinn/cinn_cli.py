#!/usr/bin/env python3
"""
cINN Command Line
-----------------
Train, sample, encode, transfer, interpolate, rescale, evaluate and check
conditional invertible networks on toy tasks.

Exit codes: 0 ok, 1 usage or configuration error, 2 I/O error (missing or
corrupt file), 3 numerical divergence, 4 diagnostics failure.

License: BSD 3-Clause
"""

import argparse
import dataclasses
import logging
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import yaml

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../..')))

from pkg.datasets.images import chroma_to_rgb, tile_images, write_image
from pkg.datasets.tasks import (ConditionalMixtureTask, Dataset, ToyTaskSpec,
                                generate_dataset, make_task)
from pkg.datasets.tensorfile import read_tensor, write_tensor
from pkg.diagnostics.checks import all_passed, run_diagnostics
from pkg.errors import (CheckpointError, ConfigurationError, ContractViolation,
                        ImageFormatError, NumericError, TensorFileError,
                        TrainingDivergedError)
from pkg.evaluation.metrics import (evaluate_nll, mode_frequencies, sample_quality)
from pkg.flow.cinn import CINN
from pkg.flow.sampling import sample
from pkg.latent_lab.operations import (ALPHA_STRIP, alpha_strip, class_style_transfer,
                                       decode, encode, interpolation_grid, latent_pca)
from pkg.log_config import configure_logging
from pkg.training.ablation import ABLATIONS, run_ablations
from pkg.training.checkpoint import restore
from pkg.training.config import load_config
from pkg.training.trainer import train as train_model

logger = logging.getLogger('cinn')

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_DIVERGED = 3
EXIT_DIAGNOSTICS = 4


class UsageError(Exception):
    """Bad command line."""


class CLIParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ============================================================================
# Helpers
# ============================================================================

def _load_model(path: str):
    model, metadata = restore(path)
    logger.info(f"Loaded checkpoint {path} (step {metadata.get('step', '?')})")
    return model, metadata


def _task_spec(metadata: Dict) -> ToyTaskSpec:
    if 'task' not in metadata:
        raise ConfigurationError("checkpoint has no task spec; pass data files explicitly")
    return ToyTaskSpec.from_dict(metadata['task'])


def _test_split(metadata: Dict, data_dir: Optional[str]) -> Dataset:
    if data_dir:
        return Dataset.load(data_dir, 'test_')
    return generate_dataset(_task_spec(metadata), 'test')


def _rows(array: np.ndarray, count: int, condition_shape) -> np.ndarray:
    """Broadcast a single condition to ``count`` rows."""
    array = np.asarray(array, dtype=np.float64)
    if array.shape == tuple(condition_shape):
        array = array[None]
    if len(array) == count:
        return array
    if len(array) == 1:
        return np.repeat(array, count, axis=0)
    raise ContractViolation(f"conditions have {len(array)} rows, expected 1 or {count}")


def _display(x: np.ndarray, y: np.ndarray) -> Optional[List[np.ndarray]]:
    """Displayable images for a batch, or None for vector data."""
    if x.ndim != 4:
        return None
    if x.shape[1] in (1, 3):
        return list(x)
    if x.shape[1] == 2 and y.ndim == 4 and y.shape[1] == 1:
        return [chroma_to_rgb(lum, chroma) for lum, chroma in zip(y, x)]
    return None


def _write_outputs(out_dir: str, name: str, x: np.ndarray, y: np.ndarray,
                   columns: Optional[int] = None) -> None:
    out = Path(out_dir)
    write_tensor(out / f"{name}.tnsr", x)
    images = _display(x, y)
    if images is None:
        print(f"✅ Wrote {len(x)} rows to {out / (name + '.tnsr')}")
        return
    ext = 'pgm' if images[0].shape[0] == 1 else 'ppm'
    for i, image in enumerate(images):
        write_image(image, out / f"{name}_{i:03d}.{ext}")
    write_image(tile_images(images, columns or len(images)), out / f"{name}_grid.{ext}")
    print(f"✅ Wrote {len(x)} samples and {name}_grid.{ext} to {out}")


def _condition_row(y: np.ndarray, index: int, condition_shape) -> np.ndarray:
    """Row ``index`` of a condition batch, or the condition itself if unbatched."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape == tuple(condition_shape):
        return y
    if not 0 <= index < len(y):
        raise ContractViolation(f"condition index {index} outside 0..{len(y) - 1}")
    return y[index]


def _single_condition(arg: str, index: int, metadata: Dict, condition_shape) -> np.ndarray:
    if arg == 'task':
        y = generate_dataset(_task_spec(metadata), 'test').y
    else:
        y = read_tensor(arg)
    return _condition_row(y, index, condition_shape)


# ============================================================================
# Commands
# ============================================================================

def cmd_train(args) -> int:
    run = load_config(args.config)
    if args.data:
        train_data = Dataset.load(args.data, 'train_')
        test_data = Dataset.load(args.data, 'test_')
    else:
        train_data = generate_dataset(run.task, 'train')
        test_data = generate_dataset(run.task, 'test')

    if args.ablations is not None:
        variants = args.ablations.split(',') if args.ablations else None
        results = run_ablations(run, train_data, test_data, variants, out_dir=args.out)
        print("Ablation results:")
        for result in results:
            print(f"  {'❌' if result.diverged else '✅'} {result.summary()}")
        return EXIT_OK

    model = CINN(run.architecture_spec(train_data.input_shape, train_data.condition_shape))
    result = train_model(train_data, run.training, model, out_path=args.out,
                         metrics_path=args.metrics, metadata=run.to_dict())
    print(f"✅ Trained {result.steps} steps: final NLL {result.final_nll:.4f} nats/dim")
    if len(test_data):
        nll = evaluate_nll(model, test_data, noise_sigma=run.training.effective_noise_sigma,
                           seed=run.training.seed)
        print(f"   Test NLL: {nll:.4f} nats/dim")
    print(f"   Checkpoint: {result.checkpoint_path}")
    return EXIT_OK


def cmd_sample(args) -> int:
    model, metadata = _load_model(args.ckpt)
    y = _single_condition(args.condition, args.index, metadata, model.spec.condition_shape)
    x = sample(y, args.n, args.temperature, model, seed=args.seed).numpy()
    _write_outputs(args.out_dir, 'samples', x, np.repeat(y[None], args.n, axis=0))
    return EXIT_OK


def cmd_encode(args) -> int:
    model, metadata = _load_model(args.ckpt)
    if args.x:
        x, y = read_tensor(args.x), read_tensor(args.y)
    else:
        data = _test_split(metadata, args.data)
        x, y = data.x, data.y
    code = encode(x, _rows(y, len(x), model.spec.condition_shape), model, {'checkpoint': args.ckpt})
    write_tensor(args.out, code.z)
    print(f"✅ Encoded {len(code)} samples ({code.dim} dims) to {args.out}")
    if args.pca:
        pca = latent_pca(code)
        axes_path = Path(args.out).with_suffix('.pca.tnsr')
        write_tensor(axes_path, pca.axes[:args.pca])
        ratios = ', '.join(f"{r:.3f}" for r in pca.explained_ratio[:args.pca])
        print(f"   Top {args.pca} principal axes -> {axes_path} (explained: {ratios})")
    return EXIT_OK


def cmd_transfer(args) -> int:
    model, _ = _load_model(args.ckpt)
    z = np.atleast_2d(read_tensor(args.z))
    if args.all_classes:
        x = class_style_transfer(z[args.index], model)
        _write_outputs(args.out_dir, 'styles', x, np.eye(len(x)))
        return EXIT_OK
    y = _rows(read_tensor(args.y), len(z), model.spec.condition_shape)
    x = decode(z, y, model)
    _write_outputs(args.out_dir, 'transfer', x, y)
    return EXIT_OK


def cmd_interpolate(args) -> int:
    model, _ = _load_model(args.ckpt)
    z = np.atleast_2d(read_tensor(args.z))
    if len(z) < 2:
        raise ContractViolation("interpolation needs a file with at least two codes")
    grid = interpolation_grid(z[args.first], z[args.second], args.grid)
    y_one = _condition_row(read_tensor(args.y), 0, model.spec.condition_shape)
    y = np.repeat(y_one[None], len(grid), axis=0)
    x = decode(grid, y, model)
    _write_outputs(args.out_dir, 'interpolation', x, y, columns=args.grid)
    return EXIT_OK


def cmd_scale(args) -> int:
    model, _ = _load_model(args.ckpt)
    z = np.atleast_2d(read_tensor(args.z))
    alphas = [float(a) for a in args.alphas.split(',')]
    strip = alpha_strip(z[args.index], alphas)
    y_one = _condition_row(read_tensor(args.y), args.index, model.spec.condition_shape)
    y = np.repeat(y_one[None], len(strip), axis=0)
    x = decode(strip, y, model)
    _write_outputs(args.out_dir, 'scale', x, y, columns=len(alphas))
    return EXIT_OK


def cmd_eval(args) -> int:
    model, metadata = _load_model(args.ckpt)
    data = _test_split(metadata, args.data)
    if args.limit:
        data = data.subset(slice(0, args.limit))
    training = metadata.get('training', {})
    if args.metric == 'nll':
        sigma = training.get('noise_sigma', 0.0) if training.get('noise', True) else 0.0
        nll = evaluate_nll(model, data, noise_sigma=sigma, seed=args.seed)
        print(f"NLL: {nll:.4f} nats/dim over {len(data)} samples")
    elif args.metric in ('bestofN', 'variance'):
        quality = sample_quality(model, data, args.n, args.temperature, args.seed)
        print(f"Best-of-{args.n} MSE: {quality.best_of_n_mse:.6f} (mean over {quality.images})")
        print(f"Pixel variance:   {quality.variance:.6f}")
    else:
        task = make_task(_task_spec(metadata))
        if not isinstance(task, ConditionalMixtureTask):
            raise ConfigurationError("--metric modes needs a conditional-mixture checkpoint")
        for label in range(task.condition_shape[0]):
            drawn = sample(task.condition(label), args.n, args.temperature, model,
                           seed=args.seed + label).numpy()
            freqs = mode_frequencies(task.assign_modes(drawn), task.num_modes)
            shown = ' '.join(f"{f:.3f}" for f in freqs)
            truth = ' '.join(f"{w:.3f}" for w in task.weights[label])
            print(f"Condition {label}: frequencies [{shown}] (true [{truth}]), sum {freqs.sum():.3f}")
    return EXIT_OK


def cmd_check(args) -> int:
    if args.ckpt:
        model, metadata = _load_model(args.ckpt)
        spec = _task_spec(metadata)
    else:
        run = load_config(args.config)
        spec = run.task
        probe = generate_dataset(dataclasses.replace(spec, samples=1, test_samples=0))
        model = CINN(run.architecture_spec(probe.input_shape, probe.condition_shape))
    data = generate_dataset(dataclasses.replace(spec, samples=args.samples, test_samples=0))
    results = run_diagnostics(model, data.x, data.y, seed=args.seed)
    for result in results:
        print(result)
    if all_passed(results):
        print("✅ All diagnostics passed")
        return EXIT_OK
    print("❌ Diagnostics failed", file=sys.stderr)
    return EXIT_DIAGNOSTICS


def cmd_gen_task(args) -> int:
    with open(args.spec, 'r') as f:
        data = yaml.safe_load(f) or {}
    if 'task' in data and isinstance(data['task'], dict):
        data = data['task']
    spec = ToyTaskSpec.from_dict(data)
    out = Path(args.out_dir)
    train_paths = generate_dataset(spec, 'train').save(out, 'train_')
    generate_dataset(spec, 'test').save(out, 'test_')
    with open(out / 'task.yaml', 'w') as f:
        yaml.safe_dump({'task': spec.to_dict()}, f, sort_keys=False)
    print(f"✅ Wrote {spec.task} ({spec.samples} train / {spec.test_samples} test) to {out}")
    entropy = make_task(spec).entropy()
    if entropy is not None:
        print(f"   Analytic H(X|Y): {entropy:.4f} nats/dim")
    logger.debug(f"Train files: {train_paths}")
    return EXIT_OK


COMMANDS = {
    'train': cmd_train,
    'sample': cmd_sample,
    'encode': cmd_encode,
    'transfer': cmd_transfer,
    'interpolate': cmd_interpolate,
    'scale': cmd_scale,
    'eval': cmd_eval,
    'check': cmd_check,
    'gen-task': cmd_gen_task,
}


# ============================================================================
# Entry point
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = CLIParser(
        prog='cinn',
        description="Conditional invertible neural networks on toy tasks",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  cinn gen-task --spec configs/affine_gaussian.yaml --out-dir data/affine
  cinn train --config configs/colorization.yaml --out runs/color.ckpt
  cinn train --config configs/colorization.yaml --out runs/ablation --ablations ""
  cinn sample --ckpt runs/color.ckpt --condition task --n 8 --out-dir out/
  cinn eval --ckpt runs/color.ckpt --metric bestofN --n 8
  cinn check --config configs/colorization.yaml
        """
    )
    parser.add_argument('--log-level', default='WARNING',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'], help='Logging level')
    parser.add_argument('--log-json', action='store_true', help='Structured JSON log lines')
    subparsers = parser.add_subparsers(dest='command', help='Commands')

    p = subparsers.add_parser('train', help='Train a model from a YAML config')
    p.add_argument('--config', required=True, help='YAML run file')
    p.add_argument('--out', required=True, help='Checkpoint path (directory with --ablations)')
    p.add_argument('--metrics', help='CSV metric log (default: <out>.csv)')
    p.add_argument('--data', help='Directory written by gen-task (default: generate)')
    p.add_argument('--ablations', nargs='?', const='',
                   help=f"Run ablation variants (comma list, empty for all: {','.join(ABLATIONS)})")

    p = subparsers.add_parser('sample', help='Draw samples for one condition')
    p.add_argument('--ckpt', required=True)
    p.add_argument('--condition', required=True, help="TensorFile of conditions, or 'task'")
    p.add_argument('--index', type=int, default=0, help='Condition row to use')
    p.add_argument('--n', type=int, default=8)
    p.add_argument('--temperature', type=float, default=1.0)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--out-dir', required=True)

    p = subparsers.add_parser('encode', help='Map data to latent codes')
    p.add_argument('--ckpt', required=True)
    p.add_argument('--x', help='TensorFile of data (default: task test split)')
    p.add_argument('--y', help='TensorFile of conditions')
    p.add_argument('--data', help='Directory written by gen-task')
    p.add_argument('--out', required=True, help='Output TensorFile of codes')
    p.add_argument('--pca', type=int, default=0, help='Also write the top-K principal axes')

    p = subparsers.add_parser('transfer', help='Decode codes under new conditions')
    p.add_argument('--ckpt', required=True)
    p.add_argument('--z', required=True)
    p.add_argument('--y', help='TensorFile of new conditions')
    p.add_argument('--all-classes', action='store_true',
                   help='Decode code --index under every one-hot class')
    p.add_argument('--index', type=int, default=0)
    p.add_argument('--out-dir', required=True)

    p = subparsers.add_parser('interpolate', help='Grid of a1*z1 + a2*z2')
    p.add_argument('--ckpt', required=True)
    p.add_argument('--z', required=True)
    p.add_argument('--y', required=True, help='Condition (first row is used)')
    p.add_argument('--grid', type=int, default=5)
    p.add_argument('--first', type=int, default=0)
    p.add_argument('--second', type=int, default=1)
    p.add_argument('--out-dir', required=True)

    p = subparsers.add_parser('scale', help='Strip of alpha * z')
    p.add_argument('--ckpt', required=True)
    p.add_argument('--z', required=True)
    p.add_argument('--y', required=True)
    p.add_argument('--alphas', default=','.join(str(a) for a in ALPHA_STRIP))
    p.add_argument('--index', type=int, default=0)
    p.add_argument('--out-dir', required=True)

    p = subparsers.add_parser('eval', help='Evaluate on the test split')
    p.add_argument('--ckpt', required=True)
    p.add_argument('--metric', required=True, choices=['nll', 'bestofN', 'variance', 'modes'])
    p.add_argument('--n', type=int, default=8, help='Samples per condition')
    p.add_argument('--temperature', type=float, default=1.0)
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--limit', type=int, default=0, help='Evaluate the first N test samples')
    p.add_argument('--data', help='Directory written by gen-task')

    p = subparsers.add_parser('check', help='Invertibility, Jacobian and gradient diagnostics')
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument('--config', help='Check a freshly initialised model')
    source.add_argument('--ckpt', help='Check a trained model')
    p.add_argument('--samples', type=int, default=8)
    p.add_argument('--seed', type=int, default=0)

    p = subparsers.add_parser('gen-task', help='Write a toy dataset as TensorFiles')
    p.add_argument('--spec', required=True, help='YAML task spec')
    p.add_argument('--out-dir', required=True)
    return parser


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"Error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return int(exc.code or 0)
    if not args.command:
        parser.print_help()
        return EXIT_USAGE
    if args.command == 'transfer' and not args.all_classes and not args.y:
        print("Error: transfer needs --y or --all-classes", file=sys.stderr)
        return EXIT_USAGE
    if args.command == 'encode' and bool(args.x) != bool(args.y):
        print("Error: encode needs both --x and --y, or neither", file=sys.stderr)
        return EXIT_USAGE

    configure_logging(args.log_level, json_format=args.log_json)
    try:
        return COMMANDS[args.command](args)
    except TrainingDivergedError as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except NumericError as e:
        print(f"❌ Numerical error: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except (FileNotFoundError, IsADirectoryError, PermissionError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_IO
    except (CheckpointError, TensorFileError, ImageFormatError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_IO
    except (ConfigurationError, ContractViolation) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_IO


def main():
    sys.exit(cli_main())


if __name__ == '__main__':
    main()
