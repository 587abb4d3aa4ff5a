"""
Tests for symbol vocabularies, sequence encoding and minibatching.
"""

import sys

import numpy as np
import pytest

sys.path.insert(0, '.')

from corpus.tags import MorphTag
from corpus.unimorph import Sample
from encoding.batching import collate, encode_samples, make_batches
from encoding.vocab import (
    BOW_ID,
    EOW_ID,
    PAD_ID,
    ROLE_CHAR,
    ROLE_LANG,
    ROLE_SUBTAG,
    SymbolVocab,
    build_vocab,
    decode_input,
    decode_output,
    encode_input,
    encode_query,
    encode_target,
)
from utils.errors import DataError


SAMPLES = [
    Sample("es", "soñar", MorphTag(("V", "IND", "PRS", "1", "SG")), "sueño"),
    Sample("es", "soñar", MorphTag(("V", "IND", "PRS", "1", "PL")), "soñamos"),
    Sample("pt", "sonhar", MorphTag(("V", "IND", "PRS", "1", "SG")), "sonho"),
]


@pytest.fixture
def vocab():
    return build_vocab(SAMPLES)


def test_specials_have_fixed_ids(vocab):
    assert (BOW_ID, EOW_ID, PAD_ID) == (0, 1, 2)
    assert [text for _, text in vocab.input_symbols[:3]] == ["<bow>", "<eow>", "<pad>"]
    assert [text for _, text in vocab.output_symbols[:3]] == ["<bow>", "<eow>", "<pad>"]


def test_vocab_ordering(vocab):
    """Specials, then language codes, then subtags sorted, then characters by code point."""
    roles = [role for role, _ in vocab.input_symbols[3:]]
    assert roles == sorted(roles, key=[ROLE_LANG, ROLE_SUBTAG, ROLE_CHAR].index)
    langs = [t for r, t in vocab.input_symbols if r == ROLE_LANG]
    chars = [t for r, t in vocab.input_symbols if r == ROLE_CHAR]
    assert langs == ["es", "pt"]
    assert chars == sorted(chars)
    assert "ñ" in chars
    # Output side carries only specials and characters
    assert [t for r, t in vocab.output_symbols[3:]] == chars


def test_language_code_and_character_are_distinct_symbols():
    samples = [Sample("es", "es", MorphTag(("N",)), "es")]
    vocab = build_vocab(samples)
    assert vocab.input_id(ROLE_LANG, "es") != vocab.input_id(ROLE_CHAR, "e")
    assert vocab.input_size == 3 + 1 + 1 + 2


def test_encode_input_layout(vocab):
    ids = encode_input(SAMPLES[0], vocab)
    assert ids[0] == BOW_ID and ids[-1] == EOW_ID
    assert ids[1] == vocab.input_id(ROLE_LANG, "es")
    assert len(ids) == 2 + 1 + 5 + len("soñar")
    assert decode_input(ids, vocab) == ("es", SAMPLES[0].tag, "soñar")


def test_encode_query_matches_encode_input(vocab):
    s = SAMPLES[2]
    assert encode_query(s.language, s.lemma, s.tag, vocab) == encode_input(s, vocab)


def test_encode_target_and_decode_output(vocab):
    ids = encode_target("sueño", vocab)
    assert ids[0] == BOW_ID and ids[-1] == EOW_ID
    assert decode_output(ids, vocab) == "sueño"
    # Decoding stops at the first EOW
    assert decode_output([*ids[1:-1], EOW_ID, vocab.output_id("s")], vocab) == "sueño"


def test_unknown_symbols_raise(vocab):
    with pytest.raises(DataError, match="unknown output character"):
        encode_target("sueñx", vocab)
    with pytest.raises(DataError, match="unknown input symbol"):
        encode_query("ca", "somiar", SAMPLES[0].tag, vocab)


def test_out_of_range_ids_raise(vocab):
    ids = encode_input(SAMPLES[0], vocab)
    with pytest.raises(DataError, match=f"input id {vocab.input_size} out of range"):
        decode_input([*ids[:-1], vocab.input_size, EOW_ID], vocab)
    with pytest.raises(DataError, match="input id -1 out of range"):
        decode_input([*ids[:-1], -1, EOW_ID], vocab)
    with pytest.raises(DataError, match=f"output id {vocab.output_size} out of range"):
        decode_output([vocab.output_id("s"), vocab.output_size], vocab)


def test_supported_output_mask_excludes_bow_and_pad(vocab):
    mask = vocab.supported_output_mask()
    assert not mask[BOW_ID] and not mask[PAD_ID]
    assert mask[EOW_ID]
    assert mask.sum() == vocab.output_size - 2


def test_vocab_save_load_and_fingerprint(tmp_path, vocab):
    path = tmp_path / "vocab.txt"
    vocab.save(path)
    loaded = SymbolVocab.load(path)
    assert loaded == vocab
    assert loaded.fingerprint() == vocab.fingerprint()
    assert build_vocab(SAMPLES[:1]).fingerprint() != vocab.fingerprint()


def test_malformed_vocab_file():
    with pytest.raises(DataError):
        SymbolVocab.from_text("# input\nspecial\t<bow>\n")
    with pytest.raises(DataError):
        SymbolVocab.from_text("# input\nbogus\tx\n# output\n")


def test_empty_vocab_rejected():
    with pytest.raises(DataError):
        build_vocab([])


def test_collate_pads_and_masks(vocab):
    encoded = encode_samples(SAMPLES, vocab)
    batch = collate(encoded)
    assert batch.size == 3
    widths = [len(e.input_ids) for e in encoded]
    assert batch.input_matrix.shape == (3, max(widths))
    assert batch.input_mask.sum(axis=1).tolist() == widths
    assert np.all(batch.input_matrix[~batch.input_mask] == PAD_ID)
    for i, e in enumerate(encoded):
        assert batch.row(i).input_ids == e.input_ids
        assert batch.row(i).target_ids == e.target_ids


def test_make_batches_keeps_final_short_batch(vocab):
    encoded = encode_samples(SAMPLES * 3, vocab)
    batches = make_batches(encoded, batch_size=4, seed=0, shuffle=False)
    assert [b.size for b in batches] == [4, 4, 1]
    with pytest.raises(ValueError):
        make_batches(encoded, batch_size=0)


def test_make_batches_shuffle_is_seeded_per_epoch(vocab):
    encoded = encode_samples(SAMPLES * 4, vocab)

    def order(seed, epoch):
        batches = make_batches(encoded, 5, seed=seed, shuffle=True, epoch=epoch)
        return [b.row(i).input_ids for b in batches for i in range(b.size)]

    assert order(1, 3) == order(1, 3)
    assert sorted(order(1, 3)) == sorted(e.input_ids for e in encoded)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__]))
