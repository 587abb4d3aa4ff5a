"""
Transflex - Synthetic Language Family
=====================================
Small agglutinating languages for data-free experiments:

- two related languages sharing the stem distribution and 8 of 10 suffix rules
- one unrelated language with a disjoint alphabet and prefixing rules

All three use the same universal subtags, e.g. ``N;ACC;PL``.
"""

from dataclasses import dataclass
from typing import Dict, List, Tuple

from utils.errors import DataError
from utils.seeding import make_rng
from .tags import MorphTag
from .unimorph import Sample

RELATED_A = "syna"
RELATED_B = "synb"
UNRELATED = "synu"

CASES = ("NOM", "ACC", "DAT", "GEN", "LOC")
NUMBERS = ("SG", "PL")

_LATIN_CONSONANTS = "ptkmnslr"
_LATIN_FRONT = "ei"
_LATIN_BACK = "aou"
_GREEK_CONSONANTS = "βγδζθλμπ"
_GREEK_VOWELS = "αεηιουω"

# "V" is a harmonizing vowel: front after a front stem vowel, back otherwise
_CASE_SUFFIX = {"NOM": "", "ACC": "Vn", "DAT": "lVk", "GEN": "Vs", "LOC": "tVr"}
_NUMBER_SUFFIX = {"SG": "", "PL": "lVr"}

# Tags whose suffix the second related language realizes differently
_B_OVERRIDES = {("GEN", "SG"): "Vm", ("LOC", "PL"): "kVrtV"}

_U_CASE_PREFIX = {"NOM": "", "ACC": "μω", "DAT": "θι", "GEN": "δο", "LOC": "ζη"}
_U_NUMBER_PREFIX = {"SG": "", "PL": "γα"}

# Latin stems number 40**2 + 40**3; rejection sampling stays fast under this
MAX_LEMMATA = 10_000
# Consecutive repeated draws before giving up on new stems
_MAX_STEM_MISSES = 1_000


def all_tags() -> List[MorphTag]:
    return [MorphTag(("N", case, number)) for case in CASES for number in NUMBERS]


def _harmonize(template: str, stem: str) -> str:
    vowels = [c for c in stem if c in _LATIN_FRONT + _LATIN_BACK]
    front = bool(vowels) and vowels[-1] in _LATIN_FRONT
    return template.replace("V", "e" if front else "a")


def _latin_stem(rng) -> str:
    syllables = int(rng.integers(2, 4))
    vowels = _LATIN_FRONT + _LATIN_BACK
    return "".join(
        _LATIN_CONSONANTS[int(rng.integers(len(_LATIN_CONSONANTS)))] + vowels[int(rng.integers(len(vowels)))]
        for _ in range(syllables)
    )


def _greek_stem(rng) -> str:
    syllables = int(rng.integers(2, 4))
    return "".join(
        _GREEK_CONSONANTS[int(rng.integers(len(_GREEK_CONSONANTS)))]
        + _GREEK_VOWELS[int(rng.integers(len(_GREEK_VOWELS)))]
        for _ in range(syllables)
    )


def _related_form(stem: str, case: str, number: str, overrides: Dict[Tuple[str, str], str]) -> str:
    if (case, number) in overrides:
        suffix = _harmonize(overrides[(case, number)], stem)
        return stem + suffix
    number_part = _harmonize(_NUMBER_SUFFIX[number], stem)
    case_part = _harmonize(_CASE_SUFFIX[case], stem)
    return stem + number_part + case_part


def _unrelated_form(stem: str, case: str, number: str) -> str:
    body = stem
    if number == "PL":
        # Plural also rewrites the final vowel
        body = stem[:-1] + "ω"
    return _U_NUMBER_PREFIX[number] + _U_CASE_PREFIX[case] + body


def _unique_stems(make_stem, rng, n: int) -> List[str]:
    stems: List[str] = []
    seen = set()
    misses = 0
    while len(stems) < n:
        stem = make_stem(rng)
        if stem in seen:
            misses += 1
            if misses >= _MAX_STEM_MISSES:
                raise DataError(f"stem space exhausted after {len(stems)} of {n} stems")
            continue
        misses = 0
        seen.add(stem)
        stems.append(stem)
    return stems


@dataclass
class SyntheticFamily:
    """Generated corpora keyed by language code."""
    corpora: Dict[str, List[Sample]]

    def __getitem__(self, language: str) -> List[Sample]:
        return self.corpora[language]


def make_synthetic_family(seed: int, n_lemmata: int = 300) -> SyntheticFamily:
    """
    Generate full paradigms for the two related languages and the unrelated one.

    Args:
        seed: Generator seed
        n_lemmata: Lemmata per language (each yields 10 samples)
    """
    if not 1 <= n_lemmata <= MAX_LEMMATA:
        raise DataError(f"n_lemmata must be between 1 and {MAX_LEMMATA}, got {n_lemmata}")
    corpora: Dict[str, List[Sample]] = {}
    for stream, language in enumerate((RELATED_A, RELATED_B, UNRELATED)):
        rng = make_rng(seed, stream)
        if language == UNRELATED:
            stems = _unique_stems(_greek_stem, rng, n_lemmata)
        else:
            stems = _unique_stems(_latin_stem, rng, n_lemmata)

        samples: List[Sample] = []
        for stem in stems:
            for case in CASES:
                for number in NUMBERS:
                    tag = MorphTag(("N", case, number))
                    if language == RELATED_A:
                        form = _related_form(stem, case, number, {})
                    elif language == RELATED_B:
                        form = _related_form(stem, case, number, _B_OVERRIDES)
                    else:
                        form = _unrelated_form(stem, case, number)
                    samples.append(Sample(language, stem, tag, form))
        corpora[language] = samples
    return SyntheticFamily(corpora)
