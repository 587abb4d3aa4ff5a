"""
Transflex - Error Types
=======================
Exception hierarchy shared by every package. The CLI maps these onto exit codes.
"""

from typing import Optional


class TransflexError(Exception):
    """Base class for all Transflex failures."""


class DataError(TransflexError, ValueError):
    """Corpus, vocabulary or dataset construction problem."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        location = ""
        if path is not None and line is not None:
            location = f"{path}:{line}: "
        elif line is not None:
            location = f"line {line}: "
        elif path is not None:
            location = f"{path}: "
        super().__init__(f"{location}{message}")


class ShapeError(TransflexError, ValueError):
    """A tensor primitive received incompatible shapes."""

    def __init__(self, operation: str, *shapes):
        self.operation = operation
        self.shapes = shapes
        rendered = ", ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"{operation}: incompatible shapes {rendered}")


class NumericalError(TransflexError, ArithmeticError):
    """Non-finite loss or parameter encountered during training."""

    def __init__(self, message: str, epoch: Optional[int] = None, batch: Optional[int] = None):
        self.epoch = epoch
        self.batch = batch
        where = ""
        if epoch is not None:
            where = f" (epoch {epoch}" + (f", batch {batch})" if batch is not None else ")")
        super().__init__(f"{message}{where}")


class CheckpointError(DataError):
    """Checkpoint file is corrupt, of an unknown version, or mismatched."""
