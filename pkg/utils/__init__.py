"""
Transflex - Utility Modules
===========================
Error types and seed handling shared by every package.
"""

from .errors import TransflexError, DataError, ShapeError, NumericalError, CheckpointError
from .seeding import SeedBundle, expand_seed, make_rng, file_digest, stream_digest

__all__ = [
    "TransflexError",
    "DataError",
    "ShapeError",
    "NumericalError",
    "CheckpointError",
    "SeedBundle",
    "expand_seed",
    "make_rng",
    "file_digest",
    "stream_digest",
]
