"""
Transflex - Parameter Store
===========================
Named float64 parameter tensors with parallel gradient accumulators,
initializers, and the binary tensor segment used inside checkpoints.

Tensor segment layout (little-endian):
    uint32 tensor count
    per tensor: uint32 name length, name bytes (UTF-8), uint32 rank,
                uint64 dims[rank], float64 (or float32) data, row-major
"""

import logging
import struct
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from utils.errors import CheckpointError, ShapeError
from .tape import Tape

logger = logging.getLogger(__name__)

PRECISIONS = {"float64": "<f8", "float32": "<f4"}


def identity_init(rows: int, cols: int) -> np.ndarray:
    """Truncated identity: 1 on the leading diagonal, 0 elsewhere."""
    if rows < 1 or cols < 1:
        raise ShapeError("identity_init", (rows, cols))
    return np.eye(rows, cols, dtype=np.float64)


def uniform_init(rows: int, cols: int, rng: np.random.Generator, scale: float) -> np.ndarray:
    if rows < 1 or cols < 1:
        raise ShapeError("uniform_init", (rows, cols))
    return rng.uniform(-scale, scale, size=(rows, cols))


class ParamStore:
    """
    The model's parameters keyed by name, plus gradient accumulators of the
    same shapes. Insertion order is preserved and defines serialization order.
    """

    def __init__(self):
        self.params: Dict[str, np.ndarray] = {}
        self.grads: Dict[str, np.ndarray] = {}

    def add(self, name: str, value: np.ndarray) -> None:
        if name in self.params:
            raise ValueError(f"duplicate parameter name '{name}'")
        value = np.array(value, dtype=np.float64)
        self.params[name] = value
        self.grads[name] = np.zeros_like(value)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def __iter__(self) -> Iterator[str]:
        return iter(self.params)

    def __len__(self) -> int:
        return len(self.params)

    def names(self) -> List[str]:
        return list(self.params)

    def num_values(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def node(self, tape: Tape, name: str):
        """Tape leaf for parameter ``name``."""
        return tape.param(name, self.params[name])

    def zero_grad(self) -> None:
        for g in self.grads.values():
            g.fill(0.0)

    def collect_grads(self, tape: Tape) -> None:
        """Add the leaf gradients of ``tape`` into the accumulators; unused parameters stay zero."""
        for name, leaf in tape.leaves.items():
            if leaf.grad is not None and name in self.grads:
                self.grads[name] += leaf.grad

    def grad_norm(self) -> float:
        total = 0.0
        for name in self.params:
            total += float(np.sum(self.grads[name] * self.grads[name]))
        return float(np.sqrt(total))

    def clip_grads(self, max_norm: float) -> float:
        """Scale gradients so their global norm is at most ``max_norm``; returns the norm before clipping."""
        norm = self.grad_norm()
        if norm > max_norm > 0:
            factor = max_norm / norm
            for g in self.grads.values():
                g *= factor
        return norm

    def all_finite(self) -> bool:
        return all(np.isfinite(p).all() for p in self.params.values())

    def copy(self) -> "ParamStore":
        clone = ParamStore()
        for name, value in self.params.items():
            clone.add(name, value)
        return clone

    def state(self) -> Dict[str, np.ndarray]:
        return {name: value.copy() for name, value in self.params.items()}

    def load_state(self, tensors: Dict[str, np.ndarray]) -> None:
        missing = set(self.params) - set(tensors)
        if missing:
            raise CheckpointError(f"missing parameter tensors: {sorted(missing)}")
        for name, value in self.params.items():
            incoming = tensors[name]
            if incoming.shape != value.shape:
                raise CheckpointError(f"parameter '{name}' has shape {incoming.shape}, expected {value.shape}")
            value[...] = incoming


def encode_tensors(tensors: Dict[str, np.ndarray], precision: str = "float64") -> bytes:
    """Serialize named tensors into the checkpoint tensor segment."""
    dtype = PRECISIONS[precision]
    chunks = [struct.pack("<I", len(tensors))]
    for name, value in tensors.items():
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<I", value.ndim))
        chunks.append(struct.pack(f"<{value.ndim}Q", *value.shape))
        chunks.append(np.ascontiguousarray(value, dtype=dtype).tobytes())
    return b"".join(chunks)


def decode_tensors(data: bytes, offset: int = 0, precision: str = "float64") -> Tuple[Dict[str, np.ndarray], int]:
    """
    Parse a tensor segment starting at ``offset``.

    Returns:
        (tensors upcast to float64, offset just past the segment)
    """
    dtype = np.dtype(PRECISIONS[precision])

    def take(n: int) -> bytes:
        nonlocal offset
        if offset + n > len(data):
            raise CheckpointError("truncated tensor segment")
        chunk = data[offset:offset + n]
        offset += n
        return chunk

    (count,) = struct.unpack("<I", take(4))
    tensors: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4))
        try:
            name = take(name_len).decode("utf-8")
        except UnicodeDecodeError:
            raise CheckpointError("tensor name is not valid UTF-8") from None
        (rank,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{rank}Q", take(8 * rank))
        size = int(np.prod(shape)) if rank else 1
        values = np.frombuffer(take(size * dtype.itemsize), dtype=dtype)
        tensors[name] = values.astype(np.float64).reshape(shape)
    return tensors, offset


def optional_precision(precision: Optional[str]) -> str:
    precision = precision or "float64"
    if precision not in PRECISIONS:
        raise ValueError(f"unknown precision '{precision}', expected one of {sorted(PRECISIONS)}")
    return precision
