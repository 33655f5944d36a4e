#!/usr/bin/env python3
"""
cINN Error Types
----------------
Typed exceptions shared by every package.

Bad input still surfaces as ``ValueError`` (the errors below subclass it where
that applies), so callers can catch broadly or precisely.

License: BSD 3-Clause
"""

from typing import Any, Dict, Optional


class CINNError(Exception):
    """Base class for all cINN errors."""


class ContractViolation(CINNError, ValueError):
    """A precondition of a public operation was not met."""


class ShapeError(ContractViolation):
    """Operand shapes do not conform."""

    def __init__(self, message: str, *shapes):
        if shapes:
            message = f"{message} (shapes: {', '.join(str(tuple(s)) for s in shapes)})"
        super().__init__(message)
        self.shapes = tuple(tuple(s) for s in shapes)


class ConditionShapeError(ShapeError):
    """A condition tensor does not match what a block or flow expects."""


class NumericError(CINNError, ArithmeticError):
    """A computation produced NaN or Inf."""

    def __init__(self, message: str, sample_index: Optional[int] = None):
        if sample_index is not None:
            message = f"{message} (sample {sample_index})"
        super().__init__(message)
        self.sample_index = sample_index


class ConfigurationError(CINNError, ValueError):
    """Invalid configuration or inconsistent model assembly."""


class CheckpointError(CINNError):
    """Base class for checkpoint problems."""


class CheckpointFormatError(CheckpointError, ValueError):
    """Checkpoint bytes could not be parsed."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class CheckpointVersionError(CheckpointError, ValueError):
    """Checkpoint was written by an unsupported format version."""


class ArchitectureMismatchError(CheckpointError, ValueError):
    """Checkpoint architecture differs from the model it is loaded into."""

    def __init__(self, message: str, stage_index: Optional[int] = None):
        super().__init__(message)
        self.stage_index = stage_index


class TensorFileError(CINNError, ValueError):
    """TensorFile bytes could not be parsed."""

    def __init__(self, message: str, offset: Optional[int] = None):
        if offset is not None:
            message = f"{message} at byte offset {offset}"
        super().__init__(message)
        self.offset = offset


class ImageFormatError(CINNError, ValueError):
    """Unsupported image layout or malformed image file."""


class TrainingDivergedError(CINNError):
    """Training loss became non-finite or exploded."""

    def __init__(self, message: str, report: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.report = report or {}
