#!/usr/bin/env python3
"""
cINN Training - Checkpoints
---------------------------
Binary checkpoint layout (integers are little-endian u32):

    b"CINN" | version
    | len | architecture JSON (UTF-8)
    | len | metadata JSON (UTF-8: step, config snapshot, task spec)
    | record count
    | records: len | name | rank | dims[rank] | float64 data

Records hold every parameter (including clamp gammas), batch-norm running
statistics, permutation tables and, optionally, the Adam moments. float64
data is stored raw, so a save/load round trip is bit-identical.

License: BSD 3-Clause
"""

import json
import logging
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from pkg.errors import (ArchitectureMismatchError, CheckpointFormatError,
                        CheckpointVersionError, ConfigurationError)
from pkg.flow.architecture import ArchitectureSpec
from pkg.flow.cinn import CINN
from pkg.numerics.optim import Adam

logger = logging.getLogger(__name__)

MAGIC = b'CINN'
VERSION = 1
_U32 = struct.Struct('<I')

PathLike = Union[str, Path]


@dataclass
class Checkpoint:
    spec: ArchitectureSpec
    metadata: Dict[str, Any]
    records: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def model_records(self) -> Dict[str, np.ndarray]:
        return {k: v for k, v in self.records.items() if not k.startswith('adam.')}

    @property
    def optimizer_records(self) -> Dict[str, np.ndarray]:
        return {k: v for k, v in self.records.items() if k.startswith('adam.')}


def _pack_text(text: str) -> bytes:
    raw = text.encode('utf-8')
    return _U32.pack(len(raw)) + raw


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    parts = [MAGIC, _U32.pack(VERSION),
             _pack_text(checkpoint.spec.to_json()),
             _pack_text(json.dumps(checkpoint.metadata, sort_keys=True)),
             _U32.pack(len(checkpoint.records))]
    for name, values in checkpoint.records.items():
        data = np.ascontiguousarray(values, dtype='<f8')
        parts.append(_pack_text(name))
        parts.append(_U32.pack(data.ndim))
        parts.append(struct.pack(f'<{data.ndim}I', *data.shape))
        parts.append(data.tobytes())
    return b''.join(parts)


class _Reader:
    """Cursor over checkpoint bytes that reports where truncation happened."""

    def __init__(self, blob: bytes):
        self.blob = blob
        self.offset = 0

    def take(self, count: int, what: str) -> bytes:
        if self.offset + count > len(self.blob):
            raise CheckpointFormatError(f"truncated {what}", self.offset)
        chunk = self.blob[self.offset:self.offset + count]
        self.offset += count
        return chunk

    def u32(self, what: str) -> int:
        return _U32.unpack(self.take(4, what))[0]

    def text(self, what: str) -> str:
        start = self.offset
        raw = self.take(self.u32(f"{what} length"), what)
        try:
            return raw.decode('utf-8')
        except UnicodeDecodeError:
            raise CheckpointFormatError(f"{what} is not UTF-8", start) from None


def decode_checkpoint(blob: bytes) -> Checkpoint:
    """
    Parse checkpoint bytes.

    Raises:
        CheckpointFormatError: Bad magic, truncation or malformed JSON, with
            the byte offset
        CheckpointVersionError: Unsupported format version
    """
    reader = _Reader(blob)
    if reader.take(4, 'magic') != MAGIC:
        raise CheckpointFormatError("bad magic (expected CINN)", 0)
    version = reader.u32('version')
    if version != VERSION:
        raise CheckpointVersionError(f"unsupported checkpoint version {version} (expected {VERSION})")
    offset = reader.offset
    try:
        spec = ArchitectureSpec.from_json(reader.text('architecture'))
        offset = reader.offset
        metadata = json.loads(reader.text('metadata'))
    except (json.JSONDecodeError, TypeError, AttributeError, ConfigurationError) as exc:
        raise CheckpointFormatError(f"malformed JSON ({exc})", offset) from None
    records: Dict[str, np.ndarray] = {}
    for _ in range(reader.u32('record count')):
        name = reader.text('record name')
        rank = reader.u32(f"rank of {name}")
        dims = tuple(reader.u32(f"dims of {name}") for _ in range(rank))
        count = int(np.prod(dims)) if dims else 1
        raw = reader.take(8 * count, f"data of {name}")
        records[name] = np.frombuffer(raw, dtype='<f8').astype(np.float64).reshape(dims)
    if reader.offset != len(blob):
        raise CheckpointFormatError(f"{len(blob) - reader.offset} trailing bytes", reader.offset)
    return Checkpoint(spec, metadata, records)


def save_checkpoint(path: PathLike, model: CINN, metadata: Optional[Dict[str, Any]] = None,
                    optimizer: Optional[Adam] = None) -> Path:
    """Write model (and optimizer) state; the file is replaced atomically."""
    path = Path(path)
    records = model.state_dict()
    if optimizer is not None:
        records.update(optimizer.state_records())
    blob = encode_checkpoint(Checkpoint(model.spec, dict(metadata or {}), records))
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_suffix(path.suffix + '.tmp')
    tmp_path.write_bytes(blob)
    os.replace(tmp_path, path)
    logger.info(f"Checkpoint written: {path} ({len(records)} records, {len(blob)} bytes)")
    return path


def load_checkpoint(path: PathLike) -> Checkpoint:
    return decode_checkpoint(Path(path).read_bytes())


def check_architecture(expected: ArchitectureSpec, found: ArchitectureSpec) -> None:
    """
    Raises:
        ArchitectureMismatchError: Naming the first differing stage (or field)
    """
    difference = expected.first_difference(found)
    if difference is not None:
        raise ArchitectureMismatchError(f"checkpoint architecture differs: {difference}",
                                        stage_index=expected.first_differing_stage(found))


def restore(checkpoint: Union[Checkpoint, PathLike], model: Optional[CINN] = None,
            optimizer: Optional[Adam] = None) -> Tuple[CINN, Dict[str, Any]]:
    """
    Load a checkpoint into ``model`` or into a freshly built one.

    Returns:
        Tuple of (model, metadata)
    """
    if not isinstance(checkpoint, Checkpoint):
        checkpoint = load_checkpoint(checkpoint)
    if model is None:
        model = CINN(checkpoint.spec)
    else:
        check_architecture(model.spec, checkpoint.spec)
    model.load_state_dict(checkpoint.model_records)
    if optimizer is not None:
        optimizer.load_state_records(checkpoint.optimizer_records)
    return model, checkpoint.metadata
