"""
Tests for corpus ingestion, split construction, shot splits and ciphers.
"""

import sys

import pytest
from hypothesis import given, settings, strategies as st

sys.path.insert(0, '.')

from corpus.cipher import CipherMap, apply_cipher, cipher_domain, identity_cipher, make_cipher
from corpus.splits import (
    ShotClass,
    learning_curve_sizes,
    make_shot_split,
    read_split_manifest,
    sample_source,
    sample_transfer_dataset,
    write_split_manifest,
)
from corpus.synthetic import MAX_LEMMATA, RELATED_A, RELATED_B, UNRELATED, _unique_stems, all_tags, make_synthetic_family
from corpus.tags import CAMEL_CASE, MorphTag, parse_tag, validate_language_code
from corpus.unimorph import Sample, group_paradigms, load_unimorph, unique_pool
from utils.errors import DataError
from utils.seeding import make_rng


FAMILY = make_synthetic_family(seed=3, n_lemmata=60)


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


# ----------------------------------------------------------------------
# Tags and loading
# ----------------------------------------------------------------------

def test_parse_tag_keeps_subtag_order():
    """UniMorph tags split on ';' in their original order."""
    tag = parse_tag("V;IND;PRS;1;SG")
    assert tag.subtags == ("V", "IND", "PRS", "1", "SG")
    assert str(tag) == "V;IND;PRS;1;SG"


def test_parse_tag_camel_case():
    assert parse_tag("1SgPresInd", CAMEL_CASE).subtags == ("1", "Sg", "Pres", "Ind")


@pytest.mark.parametrize("raw", ["", "V;;SG", "V;SG;SG"])
def test_parse_tag_rejects_malformed(raw):
    with pytest.raises(DataError):
        parse_tag(raw)


@pytest.mark.parametrize("code", ["ES", "e", "spanish", "e1"])
def test_invalid_language_codes(code):
    with pytest.raises(DataError):
        validate_language_code(code)


def test_load_unimorph_skips_blank_and_comment_lines(tmp_path):
    path = _write(
        tmp_path / "es.tsv",
        "# comment\nsoñar\tsueño\tV;IND;PRS;1;SG\n\nsoñar\tsoñamos\tV;IND;PRS;1;PL\n",
    )
    samples = load_unimorph(path, "es")
    assert [s.form for s in samples] == ["sueño", "soñamos"]
    assert all(s.language == "es" for s in samples)
    assert samples[0].tag == MorphTag(("V", "IND", "PRS", "1", "SG"))


def test_load_unimorph_reports_line_of_bad_row(tmp_path):
    path = _write(tmp_path / "es.tsv", "soñar\tsueño\tV;IND;PRS;1;SG\nsoñar\tsoñamos\n")
    with pytest.raises(DataError) as info:
        load_unimorph(path, "es")
    assert info.value.line == 2
    assert "3 tab-separated columns" in str(info.value)


def test_load_unimorph_rejects_undecodable_bytes(tmp_path):
    path = tmp_path / "es.tsv"
    path.write_bytes(b"so\xffar\tsue\xf1o\tV;SG\n")
    with pytest.raises(DataError) as info:
        load_unimorph(path, "es")
    assert info.value.line == 1


def test_missing_corpus_file_is_a_data_error(tmp_path):
    with pytest.raises(DataError):
        load_unimorph(tmp_path / "nope.tsv", "es")


def test_group_paradigms_and_conflicts():
    tag = MorphTag(("V", "SG"))
    samples = [Sample("es", "soñar", tag, "sueño"), Sample("es", "soñar", MorphTag(("V", "PL")), "soñamos")]
    paradigms = group_paradigms(samples)
    assert len(paradigms) == 1
    assert paradigms[0].entries[tag] == "sueño"

    with pytest.raises(DataError, match="conflicting"):
        group_paradigms([*samples, Sample("es", "soñar", tag, "soño")])


def test_unique_pool_drops_exact_duplicates_only():
    tag = MorphTag(("V", "SG"))
    a = Sample("es", "soñar", tag, "sueño")
    assert unique_pool([a, a]) == [a]
    with pytest.raises(DataError):
        unique_pool([a, Sample("es", "soñar", tag, "soño")])


# ----------------------------------------------------------------------
# Transfer splits
# ----------------------------------------------------------------------

def test_learning_curve_sizes():
    assert learning_curve_sizes() == [100, 400, 800, 1600, 3200, 6400, 12000]


def test_transfer_split_sizes_and_order():
    split = sample_transfer_dataset(
        FAMILY[RELATED_A], FAMILY[RELATED_B], n_s=200, n_t=50, dev_size=40, test_size=60, seed=1
    )
    assert len(split.source_train) == 200
    assert len(split.target_train) == 50
    assert len(split.dev) == 40 and len(split.test) == 60
    # Source samples come first in the train list
    assert all(s.language == RELATED_A for s in split.train[:200])
    assert all(s.language == RELATED_B for s in (*split.train[200:], *split.dev, *split.test))
    assert split.meta.source_languages == [RELATED_A]
    print(f"[OK] split n_s={split.meta.n_s} n_t={split.meta.n_t}")


def test_dev_and_test_shared_across_conditions_and_sizes():
    """Dev/test depend only on the target pool and seed."""
    base = sample_transfer_dataset([], FAMILY[RELATED_B], 0, 50, 40, 60, seed=5)
    with_source = sample_transfer_dataset(FAMILY[UNRELATED], FAMILY[RELATED_B], 100, 200, 40, 60, seed=5)
    assert base.dev == with_source.dev
    assert base.test == with_source.test
    # Smaller target train sets are prefixes of larger ones
    assert with_source.target_train[:50] == base.target_train


def test_monolingual_split_has_no_source():
    split = sample_transfer_dataset([], FAMILY[RELATED_B], 0, 30, 20, 20, seed=0)
    assert split.source_train == []
    assert split.meta.source_languages == []


def test_insufficient_target_pool():
    with pytest.raises(DataError, match="required 2000"):
        sample_transfer_dataset([], FAMILY[RELATED_B], 0, 1000, 500, 500, seed=0)


def test_insufficient_source_pool():
    with pytest.raises(DataError, match="insufficient source pool"):
        sample_source(FAMILY[RELATED_A], 10_000, seed=0)


def test_same_language_source_and_target_rejected():
    with pytest.raises(DataError):
        sample_transfer_dataset(FAMILY[RELATED_B], FAMILY[RELATED_B], 10, 10, 10, 10, seed=0)


def test_lemma_exclusion_caps_source_draw():
    target = FAMILY[RELATED_B]
    # Source reuses the target's lemmata for half its samples
    shared = [s.with_language(UNRELATED) for s in target[:300]]
    source = shared + FAMILY[UNRELATED][:300]
    split = sample_transfer_dataset(source, target, 500, 50, 40, 60, seed=2, exclude_overlapping_lemmata=True)
    target_lemmata = {s.lemma for s in (*split.target_train, *split.dev, *split.test)}
    assert not any(s.lemma in target_lemmata for s in split.source_train)
    assert split.meta.n_s == len(split.source_train) <= 500


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**31 - 1))
def test_split_hygiene_over_random_seeds(seed):
    """Train/dev/test never share a target (lemma, tag)."""
    split = sample_transfer_dataset(FAMILY[RELATED_A], FAMILY[RELATED_B], 100, 80, 50, 50, seed=seed)
    train = {s.key for s in split.target_train}
    dev = {s.key for s in split.dev}
    test = {s.key for s in split.test}
    assert not (train & dev) and not (train & test) and not (dev & test)
    split.check_hygiene()


def test_split_manifest_round_trip(tmp_path):
    split = sample_transfer_dataset(FAMILY[RELATED_A], FAMILY[RELATED_B], 30, 20, 10, 10, seed=4)
    corpus = _write(tmp_path / "syna.tsv", "x\ty\tN\n")
    write_split_manifest(tmp_path / "split", split, {RELATED_A: str(corpus)})
    loaded = read_split_manifest(tmp_path / "split")
    assert loaded.train == split.train
    assert loaded.dev == split.dev
    assert loaded.test == split.test
    assert loaded.meta.seed == 4
    assert len(loaded.meta.digests[RELATED_A]) == 64


# ----------------------------------------------------------------------
# Shot splits
# ----------------------------------------------------------------------

@settings(max_examples=100, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**31 - 1))
def test_shot_split_invariants(seed):
    """Half the tags seen once, distinct lemmata, every eval sample classified."""
    shot = make_shot_split(FAMILY[RELATED_B], seed)
    tags = set(all_tags())
    assert len(shot.seen_tags) == len(tags) // 2
    assert shot.seen_tags | shot.unseen_tags == tags
    assert not shot.seen_tags & shot.unseen_tags
    assert sorted(s.tag for s in shot.train) == sorted(shot.seen_tags)
    assert len({s.lemma for s in shot.train}) == len(shot.train)

    train_keys = {s.key for s in shot.train}
    for item in shot.eval:
        assert item.sample.key not in train_keys
        expected = ShotClass.ONE_SHOT if item.sample.tag in shot.seen_tags else ShotClass.ZERO_SHOT
        assert item.shot_class is expected


def test_shot_split_needs_two_tags():
    tag = MorphTag(("N", "NOM", "SG"))
    samples = [Sample("syna", f"l{c}", tag, f"f{c}") for c in "abc"]
    with pytest.raises(DataError, match="at least 2"):
        make_shot_split(samples, 0)


def test_shot_split_lemma_collision_exhausts_retries():
    """One lemma for every tag cannot give distinct train lemmata."""
    samples = [Sample("syna", "pako", tag, f"pako{i}") for i, tag in enumerate(all_tags())]
    with pytest.raises(DataError, match="different seed"):
        make_shot_split(samples, 0, max_attempts=3)


# ----------------------------------------------------------------------
# Ciphers
# ----------------------------------------------------------------------

def test_cipher_maps_every_character_pointwise():
    cipher = CipherMap(
        char_map={"i": "k", "o": "l", "s": "t", "t": "q", "v": "a"},
        subtag_map={"V": "V", "PST": "PST"},
        seed=0,
    )
    out = apply_cipher(Sample("pt", "visito", MorphTag(("V", "PST")), "visito"), cipher)
    assert out.lemma == "aktkql"
    assert out.form == "aktkql"
    assert out.language == "pt"


def test_make_cipher_is_a_seeded_bijection():
    chars, subtags = cipher_domain(FAMILY[RELATED_A])
    a = make_cipher(chars, subtags, seed=11)
    b = make_cipher(chars, subtags, seed=11)
    assert a == b
    assert sorted(a.char_map) == sorted(a.char_map.values()) == sorted(chars)
    assert sorted(a.subtag_map.values()) == sorted(subtags)
    assert not a.is_identity()

    sample = FAMILY[RELATED_A][0]
    assert apply_cipher(apply_cipher(sample, a), a.inverse()) == sample


def test_identity_cipher_changes_nothing():
    chars, subtags = cipher_domain(FAMILY[RELATED_A])
    cipher = identity_cipher(chars, subtags)
    assert cipher.is_identity()
    assert [apply_cipher(s, cipher) for s in FAMILY[RELATED_A][:20]] == FAMILY[RELATED_A][:20]


def test_cipher_rejects_symbols_outside_domain():
    cipher = make_cipher({"a", "b"}, {"N"}, seed=0)
    with pytest.raises(DataError):
        apply_cipher(Sample("pt", "abc", MorphTag(("N",)), "ab"), cipher)


# ----------------------------------------------------------------------
# Synthetic family
# ----------------------------------------------------------------------

def test_synthetic_family_shapes():
    family = make_synthetic_family(seed=0, n_lemmata=20)
    for language in (RELATED_A, RELATED_B, UNRELATED):
        samples = family[language]
        assert len(samples) == 20 * len(all_tags())
        assert {s.tag for s in samples} == set(all_tags())
        group_paradigms(samples)

    latin = set("".join(s.form for s in family[RELATED_A]))
    greek = set("".join(s.form for s in family[UNRELATED]))
    assert not latin & greek


def test_related_languages_share_most_suffix_rules():
    family = make_synthetic_family(seed=0, n_lemmata=30)
    def suffixes(language):
        return {(s.tag, s.form[len(s.lemma):]) for s in family[language] if s.form.startswith(s.lemma)}
    shared_tags = {tag for tag, suffix in suffixes(RELATED_A) & suffixes(RELATED_B)}
    assert len(shared_tags) == 8


def test_synthetic_lemma_count_bounds():
    with pytest.raises(DataError):
        make_synthetic_family(seed=0, n_lemmata=0)
    with pytest.raises(DataError):
        make_synthetic_family(seed=0, n_lemmata=MAX_LEMMATA + 1)


def test_unique_stems_stops_when_stem_space_is_exhausted():
    with pytest.raises(DataError, match="stem space exhausted after 1 of 2"):
        _unique_stems(lambda rng: "pata", make_rng(0, 0), 2)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__]))
