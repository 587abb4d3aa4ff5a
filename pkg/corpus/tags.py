"""
Transflex - Language Codes and Morphological Tags
=================================================
A morphological tag is an ordered bundle of universal subtags, e.g.
``V;IND;PRS;1;SG`` or, written the way prose does, ``1SgPresInd``.
"""

import re
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

from utils.errors import DataError

# Separator value selecting camel-case splitting ("1SgPresInd" -> 1, Sg, Pres, Ind)
CAMEL_CASE = "camel"
UNIMORPH_SEPARATOR = ";"

_LANGUAGE_CODE = re.compile(r"[a-z]{2,4}")
_CAMEL_PIECE = re.compile(r"[0-9]+|[A-Z][a-z]*|[a-z]+")


def validate_language_code(code: str) -> str:
    """Return ``code`` unchanged if it is a valid language code, else raise."""
    if not isinstance(code, str) or not _LANGUAGE_CODE.fullmatch(code):
        raise DataError(f"invalid language code {code!r}: expected 2-4 lowercase letters")
    return code


@dataclass(frozen=True, order=True)
class MorphTag:
    """Ordered, duplicate-free sequence of subtags."""
    subtags: Tuple[str, ...]

    def __post_init__(self):
        if not self.subtags:
            raise DataError("morphological tag has no subtags")
        seen = set()
        for subtag in self.subtags:
            if not subtag:
                raise DataError("morphological tag contains an empty subtag")
            if UNIMORPH_SEPARATOR in subtag or "\t" in subtag or "\n" in subtag:
                raise DataError(f"subtag {subtag!r} contains a separator character")
            if subtag in seen:
                raise DataError(f"duplicate subtag {subtag!r} in tag")
            seen.add(subtag)

    @classmethod
    def of(cls, subtags: Iterable[str]) -> "MorphTag":
        return cls(tuple(subtags))

    def __str__(self) -> str:
        return UNIMORPH_SEPARATOR.join(self.subtags)

    def __len__(self) -> int:
        return len(self.subtags)

    def __iter__(self):
        return iter(self.subtags)


def parse_tag(raw: str, separator: str = UNIMORPH_SEPARATOR, line: Optional[int] = None) -> MorphTag:
    """
    Split a raw tag string into a MorphTag.

    Args:
        raw: Tag text, e.g. "V;IND;PRS;1;SG"
        separator: Subtag separator, or CAMEL_CASE to split "1SgPresInd" style tags
        line: Source line number for error messages

    Returns:
        MorphTag with subtags in their original order
    """
    if not raw:
        raise DataError("malformed tag: empty tag string", line=line)

    if separator == CAMEL_CASE:
        pieces: List[str] = _CAMEL_PIECE.findall(raw)
        if "".join(pieces) != raw:
            raise DataError(f"malformed tag {raw!r}: cannot split into camel-case subtags", line=line)
    else:
        pieces = raw.split(separator)
        if any(p == "" for p in pieces):
            raise DataError(f"malformed tag {raw!r}: empty subtag", line=line)

    duplicates = sorted({p for p in pieces if pieces.count(p) > 1})
    if duplicates:
        raise DataError(f"malformed tag {raw!r}: duplicate subtag {duplicates[0]!r}", line=line)

    try:
        return MorphTag(tuple(pieces))
    except DataError as e:
        raise DataError(f"malformed tag {raw!r}: {e}", line=line) from e
