"""
Tests for the training loop, model selection and checkpoint files.
"""

import sys

import numpy as np
import pandas as pd
import pytest

sys.path.insert(0, '.')

from corpus.synthetic import RELATED_A, RELATED_B, make_synthetic_family
from encoding.vocab import build_vocab, encode_input
from model.decoding import decode_many
from training.checkpoint import MAGIC, load_checkpoint, save_checkpoint
from training.trainer import (
    LAST_CHECKPOINT,
    SELECTED_CHECKPOINT,
    SELECTION_BEST_DEV,
    SELECTION_FINAL,
    TRAIN_LOG,
    Trainer,
    TrainConfig,
    evaluate_dev,
    make_model_config,
    score_model,
)
from utils.errors import CheckpointError, DataError, NumericalError


FAMILY = make_synthetic_family(seed=0, n_lemmata=12)
TRAIN = FAMILY[RELATED_A][:30]
DEV = FAMILY[RELATED_A][30:42]
VOCAB = build_vocab(FAMILY[RELATED_A])


def _trainer(tmp_path=None, hidden=8, embed=8, train_samples=TRAIN, vocab=VOCAB, **overrides):
    values = dict(epochs=3, batch_size=8, seed=1, eval_every=1, selection=SELECTION_BEST_DEV)
    values.update(overrides)
    if tmp_path is not None:
        values["checkpoint_dir"] = str(tmp_path)
    model_config = make_model_config(vocab, train_samples, hidden, embed)
    return Trainer(model_config, TrainConfig(**values), vocab)


# ----------------------------------------------------------------------
# Configuration
# ----------------------------------------------------------------------

def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(epochs=-1)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        TrainConfig(selection="lowest-loss")
    with pytest.raises(ValueError):
        TrainConfig(dropout=1.0)
    assert TrainConfig(seed=5).shuffle_seed == 5


def test_train_config_from_settings_ignores_none_overrides():
    config = TrainConfig.from_settings(epochs=7, batch_size=None)
    assert config.epochs == 7
    assert config.batch_size == TrainConfig.from_settings().batch_size


def test_make_model_config_decode_margin():
    config = make_model_config(VOCAB, TRAIN, hidden_size=4, embedding_size=6, decode_margin=5)
    assert config.max_decode_length == max(len(s.form) for s in TRAIN) + 6
    assert (config.input_vocab_size, config.output_vocab_size) == (VOCAB.input_size, VOCAB.output_size)


def test_trainer_rejects_mismatched_vocab():
    config = make_model_config(VOCAB, TRAIN, 4, 4)
    other = build_vocab(FAMILY[RELATED_B][:3])
    with pytest.raises(DataError):
        Trainer(config, TrainConfig(epochs=1), other)


def test_empty_train_set():
    with pytest.raises(DataError):
        _trainer().train([])


# ----------------------------------------------------------------------
# Learning
# ----------------------------------------------------------------------

def test_overfits_twenty_samples():
    """
    Twenty samples over five tags are memorized within 300 epochs.

    Batch size is 2 rather than the default 20: with twenty samples the
    default makes one update per epoch, and memorization needs more steps.
    After the first 10 epochs the epoch losses, smoothed over a 10-epoch
    window, never rise by more than 1e-3.
    """
    samples = [s for s in FAMILY[RELATED_A] if s.tag.subtags[-1] == "SG"][:20]
    assert len({s.tag for s in samples}) == 5
    vocab = build_vocab(samples)
    trainer = _trainer(
        hidden=32, embed=32, train_samples=samples, vocab=vocab,
        epochs=300, batch_size=2, selection=SELECTION_FINAL,
    )
    checkpoint = trainer.train(samples)
    metrics = score_model(checkpoint.model(), vocab, samples)
    assert metrics.accuracy == 1.0
    assert metrics.mean_edit_distance == 0.0

    losses = pd.Series([record.train_loss for record in trainer.history])
    smoothed = losses.iloc[10:].rolling(10).mean().dropna()
    upticks = smoothed.diff().dropna()
    assert (upticks <= 1e-3).all(), upticks[upticks > 1e-3].head()


def test_loss_goes_down():
    trainer = _trainer(hidden=16, embed=16, epochs=15, selection=SELECTION_FINAL)
    trainer.train(TRAIN)
    losses = [record.train_loss for record in trainer.history]
    assert len(losses) == 15
    assert losses[-1] < losses[0]


def test_non_finite_loss_names_epoch_and_batch():
    trainer = _trainer(epochs=2)
    trainer.store.params["out.b"][...] = np.nan
    with pytest.raises(NumericalError) as info:
        trainer.train(TRAIN, DEV)
    assert (info.value.epoch, info.value.batch) == (1, 0)


def test_zero_epochs_returns_initial_parameters():
    trainer = _trainer(epochs=0)
    initial = trainer.store.state()
    checkpoint = trainer.train(TRAIN, DEV)
    assert checkpoint.epoch == 0
    assert all(np.array_equal(checkpoint.params[k], v) for k, v in initial.items())


def test_best_dev_selection_matches_history():
    trainer = _trainer(epochs=6, eval_every=2)
    checkpoint = trainer.train(TRAIN, DEV)
    evaluated = [r for r in trainer.history if r.dev is not None]
    assert [r.epoch for r in evaluated] == [2, 4, 6]
    best = max(evaluated, key=lambda r: (r.dev.accuracy, -r.dev.mean_edit_distance, -r.epoch))
    assert checkpoint.epoch == best.epoch
    assert checkpoint.metrics["dev_acc"] == best.dev.accuracy


def test_final_selection_keeps_last_epoch():
    trainer = _trainer(epochs=4, eval_every=2, selection=SELECTION_FINAL)
    checkpoint = trainer.train(TRAIN, DEV)
    assert checkpoint.epoch == 4
    assert all(np.array_equal(checkpoint.params[k], trainer.store.params[k]) for k in trainer.store.names())


def test_without_dev_falls_back_to_final():
    checkpoint = _trainer(epochs=2).train(TRAIN)
    assert checkpoint.epoch == 2


# ----------------------------------------------------------------------
# Checkpoints and determinism
# ----------------------------------------------------------------------

def test_checkpoint_files_and_train_log(tmp_path):
    checkpoint = _trainer(tmp_path, epochs=3).train(TRAIN, DEV)
    assert (tmp_path / SELECTED_CHECKPOINT).exists()
    assert (tmp_path / LAST_CHECKPOINT).exists()
    lines = (tmp_path / TRAIN_LOG).read_text(encoding="utf-8").splitlines()
    assert [line.split("\t")[0] for line in lines] == ["1", "2", "3"]
    assert all(len(line.split("\t")) == 4 for line in lines)

    loaded = load_checkpoint(tmp_path / SELECTED_CHECKPOINT, expected_vocab=VOCAB)
    assert loaded.epoch == checkpoint.epoch
    assert loaded.model_config == checkpoint.model_config
    assert all(np.array_equal(loaded.params[k], v) for k, v in checkpoint.params.items())
    assert loaded.metrics == pytest.approx(checkpoint.metrics)

    inputs = [encode_input(s, VOCAB) for s in DEV]
    before = [r.form for r in decode_many(checkpoint.model(), inputs, VOCAB)]
    after = [r.form for r in decode_many(loaded.model(), inputs, VOCAB)]
    assert before == after


def test_identical_runs_write_identical_bytes(tmp_path):
    _trainer(tmp_path / "a", epochs=2).train(TRAIN, DEV)
    _trainer(tmp_path / "b", epochs=2).train(TRAIN, DEV)
    for name in (SELECTED_CHECKPOINT, LAST_CHECKPOINT, TRAIN_LOG):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_resume_follows_the_same_trajectory(tmp_path):
    _trainer(tmp_path / "full", epochs=4, selection=SELECTION_FINAL, dropout=0.2).train(TRAIN)

    _trainer(tmp_path / "part", epochs=2, selection=SELECTION_FINAL, dropout=0.2).train(TRAIN)
    resumed = _trainer(tmp_path / "part", epochs=4, selection=SELECTION_FINAL, dropout=0.2)
    resumed.resume(load_checkpoint(tmp_path / "part" / LAST_CHECKPOINT))
    assert resumed.start_epoch == 3
    resumed.train(TRAIN)

    full = load_checkpoint(tmp_path / "full" / LAST_CHECKPOINT)
    part = load_checkpoint(tmp_path / "part" / LAST_CHECKPOINT)
    assert part.epoch == 4
    assert all(np.array_equal(part.params[k], v) for k, v in full.params.items())
    assert (tmp_path / "part" / TRAIN_LOG).read_text() == (tmp_path / "full" / TRAIN_LOG).read_text()


def _saved(tmp_path):
    checkpoint = _trainer(epochs=1).train(TRAIN)
    return save_checkpoint(checkpoint, tmp_path / "m.ckpt")


def test_corrupt_checkpoint_rejected(tmp_path):
    path = _saved(tmp_path)
    data = bytearray(path.read_bytes())
    data[len(data) // 2] ^= 0xFF
    path.write_bytes(bytes(data))
    with pytest.raises(CheckpointError, match="checksum"):
        load_checkpoint(path)


def test_truncated_and_extended_checkpoints_rejected(tmp_path):
    path = _saved(tmp_path)
    data = path.read_bytes()
    path.write_bytes(data[:-10])
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
    path.write_bytes(data + b"\x00")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_bad_magic_and_missing_file(tmp_path):
    path = _saved(tmp_path)
    data = path.read_bytes()
    assert data[:4] == MAGIC
    path.write_bytes(b"XXXX" + data[4:])
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(path)
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "absent.ckpt")


def test_checkpoint_vocab_mismatch(tmp_path):
    path = _saved(tmp_path)
    with pytest.raises(CheckpointError, match="vocabulary mismatch"):
        load_checkpoint(path, expected_vocab=build_vocab(FAMILY[RELATED_B]))


def test_evaluate_dev_matches_score_model():
    checkpoint = _trainer(epochs=1).train(TRAIN)
    direct = score_model(checkpoint.model(), VOCAB, DEV)
    via_checkpoint = evaluate_dev(checkpoint, DEV)
    assert via_checkpoint == direct
    assert 0.0 <= direct.accuracy <= 1.0 and direct.n == len(DEV)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__]))
