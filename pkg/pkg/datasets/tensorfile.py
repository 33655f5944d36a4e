#!/usr/bin/env python3
"""
cINN Datasets - TensorFile Format
---------------------------------
Single-array binary container used for datasets, conditions and latent codes.

Layout (all integers little-endian u32):

    b"TNSR" | version | rank | dims[rank] | float64 payload (row-major)

License: BSD 3-Clause
"""

import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np

from pkg.errors import TensorFileError

logger = logging.getLogger(__name__)

MAGIC = b'TNSR'
VERSION = 1
_U32 = struct.Struct('<I')

PathLike = Union[str, Path]


def encode_tensor(array: np.ndarray) -> bytes:
    """Serialise ``array`` as float64."""
    data = np.ascontiguousarray(array, dtype='<f8')
    header = MAGIC + _U32.pack(VERSION) + _U32.pack(data.ndim)
    header += struct.pack(f'<{data.ndim}I', *data.shape)
    return header + data.tobytes()


def decode_tensor(blob: bytes) -> np.ndarray:
    """
    Parse a TensorFile.

    Raises:
        TensorFileError: On bad magic, unknown version, truncation or
            trailing bytes, with the byte offset of the problem
    """
    if len(blob) < 4 or blob[:4] != MAGIC:
        raise TensorFileError("bad magic (expected TNSR)", offset=0)
    offset = 4

    def u32() -> int:
        nonlocal offset
        if offset + 4 > len(blob):
            raise TensorFileError("truncated header", offset=offset)
        (value,) = _U32.unpack_from(blob, offset)
        offset += 4
        return value

    version = u32()
    if version != VERSION:
        raise TensorFileError(f"unsupported version {version}", offset=4)
    rank = u32()
    dims = tuple(u32() for _ in range(rank))
    count = int(np.prod(dims)) if dims else 1
    end = offset + 8 * count
    if end > len(blob):
        raise TensorFileError(f"payload needs {8 * count} bytes, {len(blob) - offset} present",
                              offset=len(blob))
    if end != len(blob):
        raise TensorFileError(f"{len(blob) - end} trailing bytes", offset=end)
    return np.frombuffer(blob, dtype='<f8', count=count, offset=offset).astype(np.float64).reshape(dims)


def write_tensor(path: PathLike, array: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_tensor(array))
    logger.debug(f"Wrote tensor {np.shape(array)} to {path}")


def read_tensor(path: PathLike) -> np.ndarray:
    return decode_tensor(Path(path).read_bytes())
