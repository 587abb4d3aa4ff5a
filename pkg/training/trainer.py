"""
Transflex - Training Loop
=========================
Trains one tied-parameter model on the mixed source + target stream:

- every epoch reshuffles the whole train set (source and target together)
- each minibatch: forward on a fresh tape, backward, AdaDelta step
- dev evaluation every ``eval_every`` epochs and always at the last epoch
- model selection: best dev accuracy (ties: lower dev ED, then earlier
  epoch) or simply the final epoch

All randomness is a function of (seed, epoch, batch), so a run is fully
reproducible and can resume from its last checkpoint on the same trajectory.
"""

import hashlib
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from config import Settings, get_settings
from corpus.splits import DatasetSplit
from corpus.unimorph import Sample
from encoding.batching import Batch, encode_samples, make_batches
from encoding.vocab import SymbolVocab, encode_input
from evaluation.metrics import evaluate
from model.decoding import decode_many
from model.network import InflectionModel, ModelConfig, init_params
from numerics.adadelta import AdaDeltaState, adadelta_step
from numerics.tape import Tape
from utils.errors import DataError, NumericalError
from utils.seeding import make_rng
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint

logger = logging.getLogger(__name__)

SELECTION_FINAL = "final"
SELECTION_BEST_DEV = "best-dev-accuracy"
SELECTION_POLICIES = (SELECTION_FINAL, SELECTION_BEST_DEV)

SELECTED_CHECKPOINT = "model.ckpt"
LAST_CHECKPOINT = "last.ckpt"
TRAIN_LOG = "train.log"

_DROPOUT_STREAM = 7


@dataclass
class TrainConfig:
    """Training hyperparameters."""
    epochs: int = 300
    batch_size: int = 20
    seed: int = 0
    shuffle_seed: Optional[int] = None
    eval_every: int = 10
    selection: str = SELECTION_BEST_DEV
    rho: float = 0.95
    eps: float = 1e-6
    dropout: float = 0.0
    clip_norm: Optional[float] = None
    checkpoint_dir: Optional[str] = None
    workers: int = 1
    precision: str = "float64"

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1 or self.eval_every < 1:
            raise ValueError("batch_size and eval_every must be positive")
        if self.selection not in SELECTION_POLICIES:
            raise ValueError(f"unknown selection policy '{self.selection}', expected one of {SELECTION_POLICIES}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.shuffle_seed is None:
            self.shuffle_seed = self.seed

    @classmethod
    def from_settings(cls, settings: Optional[Settings] = None, **overrides) -> "TrainConfig":
        settings = settings or get_settings()
        values = dict(
            epochs=settings.epochs,
            batch_size=settings.batch_size,
            eval_every=settings.eval_every,
            selection=settings.selection,
            rho=settings.adadelta_rho,
            eps=settings.adadelta_eps,
            dropout=settings.dropout,
            clip_norm=settings.clip_norm,
            workers=settings.workers,
        )
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def to_dict(self) -> Dict[str, str]:
        """String view recorded in checkpoints; paths and worker counts are left out."""
        data = asdict(self)
        data.pop("checkpoint_dir")
        data.pop("workers")
        return {k: repr(v) if isinstance(v, float) else str(v) for k, v in data.items()}


@dataclass
class DevMetrics:
    """Dev-set scores of one evaluation."""
    n: int
    accuracy: float
    mean_edit_distance: float
    loss: float

    def to_dict(self) -> Dict[str, float]:
        return {"dev_acc": self.accuracy, "dev_ed": self.mean_edit_distance, "dev_loss": self.loss}


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev: Optional[DevMetrics] = None

    def log_line(self) -> str:
        acc = f"{self.dev.accuracy:.4f}" if self.dev else ""
        ed = f"{self.dev.mean_edit_distance:.4f}" if self.dev else ""
        return f"{self.epoch}\t{self.train_loss:.6f}\t{acc}\t{ed}\n"


def make_model_config(
    vocab: SymbolVocab,
    train_samples: Sequence[Sample],
    hidden_size: int,
    embedding_size: int,
    decode_margin: int = 5,
    init_range: float = 0.08,
) -> ModelConfig:
    """Model sizes for ``vocab``; decoding may run ``decode_margin`` symbols past the longest train form."""
    longest = max((len(s.form) for s in train_samples), default=0)
    return ModelConfig(
        input_vocab_size=vocab.input_size,
        output_vocab_size=vocab.output_size,
        hidden_size=hidden_size,
        embedding_size=embedding_size,
        max_decode_length=longest + decode_margin + 1,
        init_range=init_range,
    )


def _dev_loss(model: InflectionModel, batches: List[Batch]) -> float:
    total, count = 0.0, 0
    for batch in batches:
        total += float(model.batch_loss(Tape(enabled=False), batch).value) * batch.size
        count += batch.size
    return total / count


def score_model(
    model: InflectionModel,
    vocab: SymbolVocab,
    samples: Sequence[Sample],
    batch_size: int = 20,
    workers: int = 1,
    beam_width: int = 1,
) -> DevMetrics:
    """Decode ``samples`` and score them; the loss is the mean teacher-forced NLL."""
    if not samples:
        raise DataError("cannot evaluate on an empty dev set")
    results = decode_many(model, [encode_input(s, vocab) for s in samples], vocab, beam_width, workers=workers)
    report = evaluate([r.form for r in results], [s.form for s in samples])
    batches = make_batches(encode_samples(samples, vocab), batch_size, shuffle=False)
    return DevMetrics(report.n, report.accuracy, report.mean_edit_distance, _dev_loss(model, batches))


def evaluate_dev(checkpoint: Checkpoint, dev_samples: Sequence[Sample], workers: int = 1, beam_width: int = 1) -> DevMetrics:
    """Greedy-decode (or beam-decode) every dev sample with ``checkpoint`` and score it."""
    return score_model(checkpoint.model(), checkpoint.vocab, dev_samples, workers=workers, beam_width=beam_width)


def _rng_digest(seed: int, epoch: int) -> str:
    return hashlib.sha256(f"{seed}:{epoch}".encode("ascii")).hexdigest()[:16]


@dataclass
class _Snapshot:
    epoch: int
    params: Dict[str, np.ndarray]
    optimizer: Dict[str, np.ndarray]
    metrics: Dict[str, float] = field(default_factory=dict)
    key: tuple = ()


class Trainer:
    """
    Owns the parameter store and optimizer state of one training run.

    Args:
        model_config: Sizes matching ``vocab``
        train_config: Loop hyperparameters
        vocab: Vocabulary covering every split
    """

    def __init__(self, model_config: ModelConfig, train_config: TrainConfig, vocab: SymbolVocab):
        if model_config.input_vocab_size != vocab.input_size or model_config.output_vocab_size != vocab.output_size:
            raise DataError("model config vocabulary sizes do not match the vocabulary")
        self.model_config = model_config
        self.config = train_config
        self.vocab = vocab
        self.store = init_params(model_config, train_config.seed)
        self.model = InflectionModel(model_config, self.store)
        self.optimizer = AdaDeltaState.for_params(self.store.params, train_config.rho, train_config.eps)
        self.history: List[EpochRecord] = []
        self.start_epoch = 1

    @property
    def checkpoint_dir(self) -> Optional[Path]:
        return Path(self.config.checkpoint_dir) if self.config.checkpoint_dir else None

    def resume(self, checkpoint: Checkpoint) -> None:
        """Continue from a checkpoint written by this trainer's ``last.ckpt``."""
        checkpoint.check_vocab(self.vocab)
        self.store.load_state(checkpoint.params)
        if checkpoint.optimizer:
            self.optimizer.load_tensors(checkpoint.optimizer)
        self.start_epoch = checkpoint.epoch + 1
        logger.info(f"Resuming at epoch {self.start_epoch}")

    def _snapshot(self, epoch: int, metrics: Optional[Dict[str, float]] = None, key: tuple = ()) -> _Snapshot:
        return _Snapshot(
            epoch=epoch,
            params=self.store.state(),
            optimizer={k: v.copy() for k, v in self.optimizer.tensors().items()},
            metrics=dict(metrics or {}),
            key=key,
        )

    def _checkpoint(self, snap: _Snapshot) -> Checkpoint:
        return Checkpoint(
            model_config=self.model_config,
            vocab=self.vocab,
            params=snap.params,
            epoch=snap.epoch,
            metrics=snap.metrics,
            train_config=self.config.to_dict(),
            optimizer=snap.optimizer,
            rng_digest=_rng_digest(self.config.shuffle_seed, snap.epoch),
            precision=self.config.precision,
        )

    def _previous_best(self, directory: Optional[Path]) -> Optional[_Snapshot]:
        """On resume, the selected checkpoint of the interrupted run competes with new epochs."""
        if self.start_epoch == 1 or directory is None or not (directory / SELECTED_CHECKPOINT).exists():
            return None
        previous = load_checkpoint(directory / SELECTED_CHECKPOINT, expected_vocab=self.vocab)
        if "dev_acc" not in previous.metrics:
            return None
        key = (previous.metrics["dev_acc"], -previous.metrics["dev_ed"], -previous.epoch)
        return _Snapshot(previous.epoch, previous.params, previous.optimizer, previous.metrics, key)

    def _dropout_mask(self, batch: Batch, epoch: int, index: int) -> np.ndarray:
        rate = self.config.dropout
        rng = make_rng(self.config.shuffle_seed, _DROPOUT_STREAM, epoch, index)
        shape = batch.input_matrix.shape + (self.model_config.embedding_size,)
        return (rng.random(shape) >= rate) / (1.0 - rate)

    def train_epoch(self, encoded, epoch: int) -> float:
        """One pass over the shuffled train set; returns the mean per-sample loss."""
        total, count = 0.0, 0
        batches = make_batches(encoded, self.config.batch_size, self.config.shuffle_seed, True, epoch)
        for index, batch in enumerate(batches):
            tape = Tape()
            mask = self._dropout_mask(batch, epoch, index) if self.config.dropout > 0 else None
            loss = self.model.batch_loss(tape, batch, mask)
            value = float(loss.value)
            if not np.isfinite(value):
                logger.error(f"Non-finite loss {value} at epoch {epoch}, batch {index}")
                raise NumericalError(f"non-finite training loss {value}", epoch=epoch, batch=index)
            tape.backward(loss)
            self.store.zero_grad()
            self.store.collect_grads(tape)
            if self.config.clip_norm:
                self.store.clip_grads(self.config.clip_norm)
            adadelta_step(self.store.params, self.store.grads, self.optimizer)
            total += value * batch.size
            count += batch.size
        if not self.store.all_finite():
            raise NumericalError("non-finite parameter after update", epoch=epoch)
        return total / count

    def train(self, train_samples: Sequence[Sample], dev_samples: Sequence[Sample] = ()) -> Checkpoint:
        """
        Run the configured epochs and return the selected checkpoint.

        Raises:
            DataError: empty train set
            NumericalError: non-finite loss, naming epoch and batch
        """
        if not train_samples:
            raise DataError("cannot train on an empty train set")
        cfg = self.config
        encoded = encode_samples(train_samples, self.vocab)
        selection = cfg.selection
        if selection == SELECTION_BEST_DEV and not dev_samples:
            logger.warning("No dev samples: falling back to final-epoch selection")
            selection = SELECTION_FINAL

        directory = self.checkpoint_dir
        log_path = directory / TRAIN_LOG if directory else None
        if log_path is not None:
            directory.mkdir(parents=True, exist_ok=True)
            if self.start_epoch == 1:
                log_path.write_text("", encoding="utf-8")

        logger.info(
            f"Training on {len(encoded)} samples for {cfg.epochs} epochs "
            f"(batch {cfg.batch_size}, selection {selection}, seed {cfg.seed})"
        )
        best = self._previous_best(directory) if selection == SELECTION_BEST_DEV else None
        last = self._snapshot(self.start_epoch - 1)
        for epoch in range(self.start_epoch, cfg.epochs + 1):
            loss = self.train_epoch(encoded, epoch)
            record = EpochRecord(epoch, loss)
            if dev_samples and (epoch % cfg.eval_every == 0 or epoch == cfg.epochs):
                record.dev = score_model(self.model, self.vocab, dev_samples, cfg.batch_size, cfg.workers)
                logger.info(
                    f"Epoch {epoch}: loss {loss:.4f}, dev acc {record.dev.accuracy:.4f}, "
                    f"dev ED {record.dev.mean_edit_distance:.2f}"
                )
                key = (record.dev.accuracy, -record.dev.mean_edit_distance, -epoch)
                if selection == SELECTION_BEST_DEV and (best is None or key > best.key):
                    best = self._snapshot(epoch, {"train_loss": loss, **record.dev.to_dict()}, key)
            else:
                logger.debug(f"Epoch {epoch}: loss {loss:.4f}")
            self.history.append(record)
            if log_path is not None:
                with open(log_path, "a", encoding="utf-8", newline="\n") as f:
                    f.write(record.log_line())
            metrics = {"train_loss": loss, **(record.dev.to_dict() if record.dev else {})}
            last = self._snapshot(epoch, metrics)

        selected = best if (selection == SELECTION_BEST_DEV and best is not None) else last
        checkpoint = self._checkpoint(selected)
        if directory is not None:
            save_checkpoint(checkpoint, directory / SELECTED_CHECKPOINT)
            save_checkpoint(self._checkpoint(last), directory / LAST_CHECKPOINT)
        logger.info(f"Selected epoch {selected.epoch} ({selection})")
        return checkpoint


def train(
    split: DatasetSplit,
    model_config: ModelConfig,
    train_config: TrainConfig,
    vocab: SymbolVocab,
    resume_from: Optional[str] = None,
) -> Checkpoint:
    """Train on ``split.train`` with ``split.dev`` for selection."""
    trainer = Trainer(model_config, train_config, vocab)
    if resume_from is not None:
        trainer.resume(load_checkpoint(resume_from, expected_vocab=vocab))
    return trainer.train(split.train, split.dev)
