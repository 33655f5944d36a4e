"""
cINN Datasets Package
---------------------
Toy conditional tasks, the TensorFile container and PGM/PPM image I/O.

License: BSD 3-Clause
"""

from .tensorfile import decode_tensor, encode_tensor, read_tensor, write_tensor
from .tasks import (
    TASK_NAMES,
    ToyTaskSpec,
    Dataset,
    ToyTask,
    AffineGaussianTask,
    ConditionalMixtureTask,
    ColorizationTask,
    DigitsTask,
    make_task,
    generate_dataset,
    one_hot,
)
from .images import (chroma_to_rgb, decode_image, encode_image, quantize, read_image,
                     tile_images, write_image)

__all__ = [
    'decode_tensor',
    'encode_tensor',
    'read_tensor',
    'write_tensor',
    'TASK_NAMES',
    'ToyTaskSpec',
    'Dataset',
    'ToyTask',
    'AffineGaussianTask',
    'ConditionalMixtureTask',
    'ColorizationTask',
    'DigitsTask',
    'make_task',
    'generate_dataset',
    'one_hot',
    'chroma_to_rgb',
    'decode_image',
    'encode_image',
    'quantize',
    'read_image',
    'tile_images',
    'write_image',
]
