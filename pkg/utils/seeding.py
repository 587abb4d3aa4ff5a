"""
Transflex - Seeds and Digests
=============================
One master seed expands deterministically into the per-purpose seeds of a run;
digests identify input files and sample streams in run manifests.
"""

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable

import numpy as np


@dataclass(frozen=True)
class SeedBundle:
    """Per-purpose seeds derived from one master seed."""
    master: int
    split: int
    init: int
    shuffle: int
    cipher: int

    def to_dict(self) -> Dict[str, int]:
        """Convert to dictionary for manifests."""
        return {
            "master": self.master,
            "split": self.split,
            "init": self.init,
            "shuffle": self.shuffle,
            "cipher": self.cipher,
        }


def expand_seed(master: int) -> SeedBundle:
    """Expand a master seed into split, init, shuffle and cipher seeds."""
    words = np.random.SeedSequence(master).generate_state(4, dtype=np.uint32)
    split, init, shuffle, cipher = (int(w) for w in words)
    return SeedBundle(master=master, split=split, init=init, shuffle=shuffle, cipher=cipher)


def make_rng(*seed_parts: int) -> np.random.Generator:
    """Create a numpy Generator from one or more integer seed parts."""
    return np.random.default_rng(np.random.SeedSequence(list(seed_parts)))


def file_digest(path) -> str:
    """SHA-256 hex digest of a file's bytes."""
    h = hashlib.sha256()
    with open(Path(path), "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def stream_digest(lines: Iterable[str]) -> str:
    """SHA-256 hex digest of a sequence of text lines (order-sensitive)."""
    h = hashlib.sha256()
    for line in lines:
        h.update(line.encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()
