#!/usr/bin/env python3
"""
cINN Datasets - Images
----------------------
Binary PGM (P5, one channel) and PPM (P6, three channels) with 8-bit
round-half-up quantisation, chroma-to-RGB conversion for colorization
outputs, and tiling of samples into strips and grids.

License: BSD 3-Clause
"""

import logging
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from pkg.errors import ImageFormatError, ShapeError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def quantize(values: np.ndarray) -> np.ndarray:
    """Clamp to [0, 1] and round half up to 0..255."""
    return np.floor(np.clip(values, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def _as_chw(x) -> np.ndarray:
    x = np.asarray(x.numpy() if hasattr(x, 'numpy') else x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3:
        raise ShapeError("images must be (H, W) or (C, H, W)", x.shape)
    return x


def encode_image(x) -> bytes:
    x = _as_chw(x)
    channels, height, width = x.shape
    if channels == 1:
        magic = b'P5'
    elif channels == 3:
        magic = b'P6'
    else:
        raise ImageFormatError(f"cannot write {channels} channels (need 1 or 3)")
    header = magic + f"\n{width} {height}\n255\n".encode('ascii')
    return header + quantize(x).transpose(1, 2, 0).tobytes()


def write_image(x, path: PathLike) -> None:
    """Write a (1|3, H, W) array in [0, 1] as PGM or PPM."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_image(x))
    logger.debug(f"Wrote image {path}")


def decode_image(blob: bytes) -> np.ndarray:
    """
    Parse P5/P6 with maxval 255 into a (C, H, W) array in [0, 1].

    Raises:
        ImageFormatError: On an unknown magic, bad header or short payload
    """
    magic = blob[:2]
    if magic not in (b'P5', b'P6'):
        raise ImageFormatError(f"unsupported magic {magic!r}")
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(blob) and blob[pos:pos + 1].isspace():
            pos += 1
        if blob[pos:pos + 1] == b'#':
            while pos < len(blob) and blob[pos:pos + 1] != b'\n':
                pos += 1
            continue
        start = pos
        while pos < len(blob) and blob[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise ImageFormatError(f"malformed header near byte {pos}")
        tokens.append(int(blob[start:pos]))
    pos += 1
    width, height, maxval = tokens
    if maxval != 255:
        raise ImageFormatError(f"only 8-bit images are supported, maxval={maxval}")
    channels = 1 if magic == b'P5' else 3
    count = width * height * channels
    payload = blob[pos:pos + count]
    if len(payload) != count:
        raise ImageFormatError(f"payload has {len(payload)} bytes, expected {count}")
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, channels)
    return pixels.transpose(2, 0, 1).astype(np.float64) / 255.0


def read_image(path: PathLike) -> np.ndarray:
    return decode_image(Path(path).read_bytes())


def chroma_to_rgb(luminance, chroma) -> np.ndarray:
    """
    Combine a (1, H, W) luminance in [0, 1] with (2, H, W) chroma in [-1, 1].

    Opponent-colour style mixing, clamped to [0, 1]; meant for display only.
    """
    lum = _as_chw(luminance)[0]
    chroma = _as_chw(chroma)
    if chroma.shape[0] != 2 or chroma.shape[1:] != lum.shape:
        raise ShapeError("chroma must be (2, H, W) matching the luminance", lum.shape, chroma.shape)
    a, b = 0.5 * chroma[0], 0.5 * chroma[1]
    rgb = np.stack([lum + a, lum - 0.5 * a - 0.5 * b, lum + b])
    return np.clip(rgb, 0.0, 1.0)


def tile_images(images: Sequence, columns: int, padding: int = 1, fill: float = 1.0) -> np.ndarray:
    """
    Arrange equally shaped (C, H, W) images row by row into one image.

    Raises:
        ShapeError: If the images differ in shape
    """
    arrays = [_as_chw(img) for img in images]
    if not arrays:
        raise ShapeError("no images to tile")
    shape = arrays[0].shape
    for arr in arrays[1:]:
        if arr.shape != shape:
            raise ShapeError("tiled images must share one shape", shape, arr.shape)
    columns = max(1, min(columns, len(arrays)))
    rows = (len(arrays) + columns - 1) // columns
    c, h, w = shape
    out = np.full((c, rows * h + (rows - 1) * padding, columns * w + (columns - 1) * padding), fill)
    for i, arr in enumerate(arrays):
        r, col = divmod(i, columns)
        top, left = r * (h + padding), col * (w + padding)
        out[:, top:top + h, left:left + w] = arr
    return out
