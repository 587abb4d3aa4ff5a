"""
Transflex - UniMorph Corpus Ingestion
=====================================
Reads ``lemma<TAB>form<TAB>tag`` files into Samples and groups them into paradigms.
"""

import logging
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Tuple

from utils.errors import DataError
from .tags import MorphTag, parse_tag, validate_language_code, UNIMORPH_SEPARATOR

logger = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class Sample:
    """One (language, lemma, tag, form) record."""
    language: str
    lemma: str
    tag: MorphTag
    form: str

    def __post_init__(self):
        validate_language_code(self.language)
        for name, value in (("lemma", self.lemma), ("form", self.form)):
            if not value:
                raise DataError(f"sample {name} is empty")
            if "\t" in value or "\n" in value:
                raise DataError(f"sample {name} {value!r} contains a tab or newline")

    @property
    def key(self) -> Tuple[str, MorphTag]:
        """(lemma, tag) identity used for split disjointness."""
        return (self.lemma, self.tag)

    def with_language(self, language: str) -> "Sample":
        return Sample(language, self.lemma, self.tag, self.form)

    def to_fields(self) -> List[str]:
        return [self.language, self.lemma, str(self.tag), self.form]


@dataclass
class Paradigm:
    """All forms of one lemma, keyed by tag."""
    language: str
    lemma: str
    entries: Dict[MorphTag, str] = field(default_factory=dict)

    def samples(self) -> List[Sample]:
        return [Sample(self.language, self.lemma, tag, form) for tag, form in self.entries.items()]


def _split_lines(raw: bytes) -> Iterable[Tuple[int, bytes]]:
    for number, line in enumerate(raw.split(b"\n"), start=1):
        yield number, line.rstrip(b"\r")


def load_unimorph(path, language: str, separator: str = UNIMORPH_SEPARATOR) -> List[Sample]:
    """
    Load a UniMorph-style TSV file.

    Args:
        path: File with one ``lemma<TAB>form<TAB>tag`` entry per line
        language: Language code assigned to every sample
        separator: Subtag separator used in the tag column

    Returns:
        Samples in file order (blank and ``#`` comment lines skipped)
    """
    validate_language_code(language)
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise DataError(f"cannot read corpus: {e}", path=str(path)) from e

    samples: List[Sample] = []
    composed_lines = 0
    decomposed_lines = 0

    for number, line_bytes in _split_lines(raw):
        try:
            line = line_bytes.decode("utf-8")
        except UnicodeDecodeError as e:
            raise DataError(f"undecodable bytes ({e.reason})", path=str(path), line=number) from e

        if not line.strip() or line.lstrip().startswith("#"):
            continue

        columns = line.split("\t")
        if len(columns) != 3:
            raise DataError(
                f"expected 3 tab-separated columns (lemma, form, tag), found {len(columns)}",
                path=str(path), line=number,
            )
        lemma, form, raw_tag = columns
        try:
            tag = parse_tag(raw_tag.strip(), separator=separator)
            samples.append(Sample(language, lemma, tag, form))
        except DataError as e:
            raise DataError(str(e), path=str(path), line=number) from e

        text = lemma + form
        if not unicodedata.is_normalized("NFD", text):
            composed_lines += 1
        if not unicodedata.is_normalized("NFC", text):
            decomposed_lines += 1

    if composed_lines and decomposed_lines:
        logger.warning(
            f"{path}: mixes Unicode normalization forms "
            f"({composed_lines} composed, {decomposed_lines} decomposed lines); "
            f"forms are compared verbatim"
        )

    logger.info(f"Loaded {len(samples)} samples for '{language}' from {path}")
    return samples


def group_paradigms(samples: Iterable[Sample]) -> List[Paradigm]:
    """
    Group samples of one language into paradigms, one per lemma.

    Raises:
        DataError: mixed languages, or one (lemma, tag) listed twice
    """
    paradigms: Dict[str, Paradigm] = {}
    language = None

    for sample in samples:
        if language is None:
            language = sample.language
        elif sample.language != language:
            raise DataError(
                f"group_paradigms expects one language, got '{language}' and '{sample.language}'"
            )

        paradigm = paradigms.setdefault(sample.lemma, Paradigm(sample.language, sample.lemma))
        existing = paradigm.entries.get(sample.tag)
        if existing is not None:
            if existing != sample.form:
                raise DataError(
                    f"conflicting forms for lemma {sample.lemma!r} tag {sample.tag}: "
                    f"{existing!r} vs {sample.form!r}"
                )
            raise DataError(f"duplicate entry for lemma {sample.lemma!r} tag {sample.tag}")
        paradigm.entries[sample.tag] = sample.form

    return list(paradigms.values())


def flatten_paradigms(paradigms: Iterable[Paradigm]) -> List[Sample]:
    """Inverse of group_paradigms up to ordering."""
    return [s for p in paradigms for s in p.samples()]


def unique_pool(samples: Iterable[Sample]) -> List[Sample]:
    """
    Drop exact duplicate lines, keeping first occurrences in order.

    Conflicting forms for the same (lemma, tag) still raise.
    """
    seen: Dict[Tuple[str, str, MorphTag], str] = {}
    pool: List[Sample] = []
    dropped = 0
    for s in samples:
        key = (s.language, s.lemma, s.tag)
        if key in seen:
            if seen[key] != s.form:
                raise DataError(
                    f"conflicting forms for lemma {s.lemma!r} tag {s.tag}: {seen[key]!r} vs {s.form!r}"
                )
            dropped += 1
            continue
        seen[key] = s.form
        pool.append(s)
    if dropped:
        logger.warning(f"Dropped {dropped} exact duplicate samples")
    return pool