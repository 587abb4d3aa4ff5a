"""
Transflex - Symbol Vocabulary
=============================
One shared input vocabulary (specials, language codes, subtags, characters) and
one output vocabulary (specials, characters), with deterministic id order so
checkpoints stay portable.

Input format:  [BOW, language, subtag..., lemma char..., EOW]
Output format: [BOW, form char..., EOW]
"""

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from corpus.tags import MorphTag
from corpus.unimorph import Sample
from utils.errors import DataError

logger = logging.getLogger(__name__)

BOW = "<bow>"
EOW = "<eow>"
PAD = "<pad>"
SPECIALS = (BOW, EOW, PAD)
BOW_ID, EOW_ID, PAD_ID = 0, 1, 2

ROLE_SPECIAL = "special"
ROLE_LANG = "lang"
ROLE_SUBTAG = "subtag"
ROLE_CHAR = "char"
ROLES = (ROLE_SPECIAL, ROLE_LANG, ROLE_SUBTAG, ROLE_CHAR)

Symbol = Tuple[str, str]  # (role, text)


@dataclass(frozen=True)
class SymbolVocab:
    """Bidirectional symbol <-> id maps for the input and output sides."""
    input_symbols: Tuple[Symbol, ...]
    output_symbols: Tuple[Symbol, ...]
    _input_index: Dict[Symbol, int] = field(init=False, repr=False, compare=False)
    _output_index: Dict[Symbol, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for side, symbols in (("input", self.input_symbols), ("output", self.output_symbols)):
            if tuple(text for _, text in symbols[:3]) != SPECIALS:
                raise DataError(f"{side} vocabulary must start with {SPECIALS}")
            if len(set(symbols)) != len(symbols):
                raise DataError(f"{side} vocabulary contains duplicate symbols")
        object.__setattr__(self, "_input_index", {s: i for i, s in enumerate(self.input_symbols)})
        object.__setattr__(self, "_output_index", {s: i for i, s in enumerate(self.output_symbols)})

    @property
    def input_size(self) -> int:
        return len(self.input_symbols)

    @property
    def output_size(self) -> int:
        return len(self.output_symbols)

    def input_id(self, role: str, text: str) -> int:
        try:
            return self._input_index[(role, text)]
        except KeyError:
            raise DataError(f"unknown input symbol {text!r} ({role})") from None

    def output_id(self, char: str) -> int:
        try:
            return self._output_index[(ROLE_CHAR, char)]
        except KeyError:
            raise DataError(f"unknown output character {char!r}") from None

    def input_symbol(self, i: int) -> Symbol:
        if not 0 <= i < self.input_size:
            raise DataError(f"input id {i} out of range (vocabulary size {self.input_size})")
        return self.input_symbols[i]

    def output_symbol(self, i: int) -> Symbol:
        if not 0 <= i < self.output_size:
            raise DataError(f"output id {i} out of range (vocabulary size {self.output_size})")
        return self.output_symbols[i]

    def supported_output_mask(self) -> np.ndarray:
        """Symbols the decoder may emit: EOW and every character (never BOW or PAD)."""
        mask = np.ones(self.output_size, dtype=bool)
        mask[BOW_ID] = False
        mask[PAD_ID] = False
        return mask

    def to_text(self) -> str:
        """Serialize: one ``role<TAB>symbol`` line per id, input section then output section."""
        lines = ["# input"]
        lines += [f"{role}\t{text}" for role, text in self.input_symbols]
        lines.append("# output")
        lines += [f"{role}\t{text}" for role, text in self.output_symbols]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SymbolVocab":
        sections: Dict[str, List[Symbol]] = {}
        current = None
        for number, line in enumerate(text.split("\n"), start=1):
            if not line:
                continue
            if line.startswith("# "):
                current = line[2:].strip()
                sections[current] = []
                continue
            role, sep, symbol = line.partition("\t")
            if current is None or not sep or role not in ROLES:
                raise DataError("malformed vocabulary line", line=number)
            sections[current].append((role, symbol))
        if set(sections) != {"input", "output"}:
            raise DataError("vocabulary must contain input and output sections")
        return cls(tuple(sections["input"]), tuple(sections["output"]))

    def save(self, path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "SymbolVocab":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    def fingerprint(self) -> str:
        """Short digest identifying this exact vocabulary."""
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()[:16]


def build_vocab(samples: Iterable[Sample]) -> SymbolVocab:
    """
    Build the vocabulary over every sample of every split and language.

    Ordering: specials, language codes sorted, subtags sorted, characters by code point.
    """
    languages, subtags, chars = set(), set(), set()
    count = 0
    for s in samples:
        count += 1
        languages.add(s.language)
        subtags.update(s.tag.subtags)
        chars.update(s.lemma)
        chars.update(s.form)
    if count == 0:
        raise DataError("cannot build a vocabulary from an empty sample list")

    specials = [(ROLE_SPECIAL, s) for s in SPECIALS]
    char_symbols = [(ROLE_CHAR, c) for c in sorted(chars)]
    vocab = SymbolVocab(
        input_symbols=tuple(
            specials
            + [(ROLE_LANG, lang) for lang in sorted(languages)]
            + [(ROLE_SUBTAG, t) for t in sorted(subtags)]
            + char_symbols
        ),
        output_symbols=tuple(specials + char_symbols),
    )
    logger.info(
        f"Vocabulary: {len(languages)} languages, {len(subtags)} subtags, {len(chars)} characters "
        f"(input {vocab.input_size}, output {vocab.output_size})"
    )
    return vocab


def encode_input(sample: Sample, vocab: SymbolVocab) -> List[int]:
    """[BOW, language, subtags..., lemma characters..., EOW] as ids."""
    return encode_query(sample.language, sample.lemma, sample.tag, vocab)


def encode_query(language: str, lemma: str, tag: MorphTag, vocab: SymbolVocab) -> List[int]:
    """Encode an input that has no gold form (decoding requests)."""
    ids = [BOW_ID, vocab.input_id(ROLE_LANG, language)]
    ids += [vocab.input_id(ROLE_SUBTAG, t) for t in tag.subtags]
    ids += [vocab.input_id(ROLE_CHAR, c) for c in lemma]
    ids.append(EOW_ID)
    return ids


def encode_target(form: str, vocab: SymbolVocab) -> List[int]:
    """[BOW, form characters..., EOW] as ids."""
    return [BOW_ID, *(vocab.output_id(c) for c in form), EOW_ID]


def decode_input(ids: Sequence[int], vocab: SymbolVocab) -> Tuple[str, MorphTag, str]:
    """Recover (language, tag, lemma) from encoded input ids."""
    if len(ids) < 4 or ids[0] != BOW_ID or ids[-1] != EOW_ID:
        raise DataError("encoded input must be framed by BOW and EOW")
    symbols = [vocab.input_symbol(i) for i in ids[1:-1]]
    role, language = symbols[0]
    if role != ROLE_LANG:
        raise DataError("encoded input must start with a language code after BOW")
    subtags = [text for role, text in symbols[1:] if role == ROLE_SUBTAG]
    lemma = "".join(text for role, text in symbols[1:] if role == ROLE_CHAR)
    return language, MorphTag(tuple(subtags)), lemma


def decode_output(ids: Iterable[int], vocab: SymbolVocab) -> str:
    """Characters of an output id sequence, dropping specials and stopping at EOW."""
    chars = []
    for i in ids:
        if i == EOW_ID:
            break
        role, text = vocab.output_symbol(i)
        if role == ROLE_CHAR:
            chars.append(text)
    return "".join(chars)
