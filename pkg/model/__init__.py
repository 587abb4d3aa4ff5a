"""
Transflex - Model Module
========================
The attentional encoder-decoder and its decoders.
"""

from .network import (
    ModelConfig,
    EncoderStates,
    InflectionModel,
    init_params,
    param_shapes,
    build_model,
    toy_batch,
    default_support,
    INIT_IDENTITY,
    INIT_UNIFORM,
    DECODER_GRU_MATRICES,
)
from .decoding import DecodeResult, greedy_decode, beam_decode, decode_many

__all__ = [
    "ModelConfig",
    "EncoderStates",
    "InflectionModel",
    "init_params",
    "param_shapes",
    "build_model",
    "toy_batch",
    "default_support",
    "INIT_IDENTITY",
    "INIT_UNIFORM",
    "DECODER_GRU_MATRICES",
    "DecodeResult",
    "greedy_decode",
    "beam_decode",
    "decode_many",
]
