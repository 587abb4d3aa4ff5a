"""
Transflex - Encoding Module
===========================
Symbol vocabularies, sample encoding and padded minibatches.
"""

from .vocab import (
    SymbolVocab,
    BOW,
    EOW,
    PAD,
    BOW_ID,
    EOW_ID,
    PAD_ID,
    build_vocab,
    encode_input,
    encode_query,
    encode_target,
    decode_input,
    decode_output,
)
from .batching import EncodedSample, Batch, encode_sample, encode_samples, collate, make_batches

__all__ = [
    "SymbolVocab",
    "BOW",
    "EOW",
    "PAD",
    "BOW_ID",
    "EOW_ID",
    "PAD_ID",
    "build_vocab",
    "encode_input",
    "encode_query",
    "encode_target",
    "decode_input",
    "decode_output",
    "EncodedSample",
    "Batch",
    "encode_sample",
    "encode_samples",
    "collate",
    "make_batches",
]
