"""
Transflex - Checkpoints
=======================
Binary checkpoint files:

    b"MXFR" | uint32 version
    | uint32 length + vocabulary text (UTF-8)
    | uint32 length + config text (key=value lines, UTF-8)
    | tensor segment (parameters, then optimizer state)
    | SHA-256 of every preceding byte

Nothing time-dependent is stored, so identical training runs write identical bytes.
"""

import hashlib
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from encoding.vocab import SymbolVocab
from model.network import InflectionModel, ModelConfig
from numerics.params import ParamStore, decode_tensors, encode_tensors, optional_precision
from utils.errors import CheckpointError

logger = logging.getLogger(__name__)

MAGIC = b"MXFR"
FORMAT_VERSION = 1
_DIGEST_SIZE = 32


@dataclass
class Checkpoint:
    """Everything needed to decode with, or resume, a trained model."""
    model_config: ModelConfig
    vocab: SymbolVocab
    params: Dict[str, np.ndarray]
    epoch: int = 0
    metrics: Dict[str, float] = field(default_factory=dict)
    train_config: Dict[str, str] = field(default_factory=dict)
    optimizer: Dict[str, np.ndarray] = field(default_factory=dict)
    rng_digest: str = ""
    precision: str = "float64"
    format_version: int = FORMAT_VERSION

    def model(self) -> InflectionModel:
        store = ParamStore()
        for name, value in self.params.items():
            store.add(name, value)
        return InflectionModel(self.model_config, store)

    def check_vocab(self, vocab: SymbolVocab) -> None:
        """Refuse to run against a vocabulary other than the one trained with."""
        if vocab.fingerprint() != self.vocab.fingerprint():
            raise CheckpointError(
                f"vocabulary mismatch: checkpoint {self.vocab.fingerprint()} vs supplied {vocab.fingerprint()}"
            )

    def config_lines(self) -> str:
        entries = {"epoch": str(self.epoch), "precision": self.precision, "rng_digest": self.rng_digest}
        entries.update({f"model.{k}": repr(v) if isinstance(v, float) else str(v) for k, v in self.model_config.to_dict().items()})
        entries.update({f"train.{k}": v for k, v in self.train_config.items()})
        entries.update({f"metric.{k}": repr(float(v)) for k, v in self.metrics.items()})
        return "".join(f"{k}={v}\n" for k, v in entries.items())


def save_checkpoint(checkpoint: Checkpoint, path) -> Path:
    """Write ``checkpoint`` to ``path`` (parent directories are created)."""
    precision = optional_precision(checkpoint.precision)
    vocab_bytes = checkpoint.vocab.to_text().encode("utf-8")
    config_bytes = checkpoint.config_lines().encode("utf-8")
    tensors = dict(checkpoint.params)
    tensors.update(checkpoint.optimizer)

    body = b"".join(
        [
            MAGIC,
            struct.pack("<I", checkpoint.format_version),
            struct.pack("<I", len(vocab_bytes)),
            vocab_bytes,
            struct.pack("<I", len(config_bytes)),
            config_bytes,
            encode_tensors(tensors, precision),
        ]
    )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(body + hashlib.sha256(body).digest())
    logger.info(f"Saved checkpoint (epoch {checkpoint.epoch}) to {path}")
    return path


def _parse_config(text: str) -> Dict[str, str]:
    entries = {}
    for number, line in enumerate(text.splitlines(), start=1):
        key, sep, value = line.partition("=")
        if not sep:
            raise CheckpointError("malformed config line in checkpoint", line=number)
        entries[key] = value
    return entries


def load_checkpoint(path, expected_vocab: Optional[SymbolVocab] = None) -> Checkpoint:
    """
    Read a checkpoint, verifying magic, checksum and version.

    Raises:
        CheckpointError: corrupt or truncated file, unknown version, or a
            vocabulary different from ``expected_vocab``
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint: {e}", path=str(path)) from e

    if len(data) < len(MAGIC) + 4 + _DIGEST_SIZE or data[:4] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic or too short)", path=str(path))
    body, digest = data[:-_DIGEST_SIZE], data[-_DIGEST_SIZE:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError("checksum mismatch: file is corrupt or truncated", path=str(path))

    (version,) = struct.unpack_from("<I", body, 4)
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {FORMAT_VERSION})", path=str(path))

    try:
        offset = 8
        (vocab_len,) = struct.unpack_from("<I", body, offset)
        offset += 4
        vocab = SymbolVocab.from_text(body[offset:offset + vocab_len].decode("utf-8"))
        offset += vocab_len
        (config_len,) = struct.unpack_from("<I", body, offset)
        offset += 4
        config = _parse_config(body[offset:offset + config_len].decode("utf-8"))
        offset += config_len
        precision = optional_precision(config.get("precision"))
        tensors, offset = decode_tensors(body, offset, precision)
    except (struct.error, UnicodeDecodeError, ValueError) as e:
        raise CheckpointError(f"corrupt checkpoint: {e}", path=str(path)) from e
    if offset != len(body):
        raise CheckpointError("trailing bytes after tensor segment", path=str(path))

    model_config = ModelConfig.from_dict({k[len("model."):]: v for k, v in config.items() if k.startswith("model.")})
    checkpoint = Checkpoint(
        model_config=model_config,
        vocab=vocab,
        params={k: v for k, v in tensors.items() if not k.startswith("opt.")},
        epoch=int(config.get("epoch", "0")),
        metrics={k[len("metric."):]: float(v) for k, v in config.items() if k.startswith("metric.")},
        train_config={k[len("train."):]: v for k, v in config.items() if k.startswith("train.")},
        optimizer={k: v for k, v in tensors.items() if k.startswith("opt.")},
        rng_digest=config.get("rng_digest", ""),
        precision=precision,
        format_version=version,
    )
    if expected_vocab is not None:
        checkpoint.check_vocab(expected_vocab)
    logger.info(f"Loaded checkpoint (epoch {checkpoint.epoch}) from {path}")
    return checkpoint
