"""
Transflex - Minibatching
========================
Encoded samples and padded, masked minibatches.
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from corpus.unimorph import Sample
from utils.seeding import make_rng
from .vocab import PAD_ID, SymbolVocab, encode_input, encode_target

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EncodedSample:
    """Input and target id sequences of one sample (no PAD inside)."""
    input_ids: tuple
    target_ids: tuple
    language: str


@dataclass
class Batch:
    """Right-padded id matrices with validity masks."""
    input_matrix: np.ndarray
    input_mask: np.ndarray
    target_matrix: np.ndarray
    target_mask: np.ndarray

    @property
    def size(self) -> int:
        return int(self.input_matrix.shape[0])

    def row(self, i: int) -> EncodedSample:
        """Unpadded row ``i``; language is not stored in the matrices."""
        return EncodedSample(
            input_ids=tuple(int(x) for x in self.input_matrix[i][self.input_mask[i]]),
            target_ids=tuple(int(x) for x in self.target_matrix[i][self.target_mask[i]]),
            language="",
        )


def encode_sample(sample: Sample, vocab: SymbolVocab) -> EncodedSample:
    return EncodedSample(
        input_ids=tuple(encode_input(sample, vocab)),
        target_ids=tuple(encode_target(sample.form, vocab)),
        language=sample.language,
    )


def encode_samples(samples: Sequence[Sample], vocab: SymbolVocab) -> List[EncodedSample]:
    return [encode_sample(s, vocab) for s in samples]


def _pad(sequences: Sequence[Sequence[int]]):
    width = max(len(seq) for seq in sequences)
    matrix = np.full((len(sequences), width), PAD_ID, dtype=np.int64)
    mask = np.zeros((len(sequences), width), dtype=bool)
    for i, seq in enumerate(sequences):
        matrix[i, :len(seq)] = seq
        mask[i, :len(seq)] = True
    return matrix, mask


def collate(encoded: Sequence[EncodedSample]) -> Batch:
    """Pad a group of encoded samples to the group's max lengths."""
    input_matrix, input_mask = _pad([e.input_ids for e in encoded])
    target_matrix, target_mask = _pad([e.target_ids for e in encoded])
    return Batch(input_matrix, input_mask, target_matrix, target_mask)


def make_batches(
    encoded: Sequence[EncodedSample],
    batch_size: int,
    seed: int = 0,
    shuffle: bool = True,
    epoch: int = 0,
) -> List[Batch]:
    """
    Split encoded samples into padded minibatches.

    With ``shuffle`` the order is a permutation drawn from (seed, epoch), so each
    epoch gets a fresh but reproducible order. The final short batch is kept.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    if not encoded:
        return []

    order = np.arange(len(encoded))
    if shuffle:
        order = make_rng(seed, epoch).permutation(len(encoded))

    batches = []
    for start in range(0, len(encoded), batch_size):
        batches.append(collate([encoded[i] for i in order[start:start + batch_size]]))
    logger.debug(f"Epoch {epoch}: {len(batches)} batches of up to {batch_size}")
    return batches
