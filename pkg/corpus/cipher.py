"""
Transflex - Source-Language Cipher
==================================
A random bijection over a source language's characters and subtags. Characters
map to characters and subtags to subtags; language codes are never touched.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Tuple

from utils.errors import DataError
from utils.seeding import make_rng
from .tags import MorphTag
from .unimorph import Sample

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CipherMap:
    """Character and subtag permutations drawn from one seed."""
    char_map: Dict[str, str]
    subtag_map: Dict[str, str]
    seed: int

    @property
    def mapping(self) -> Dict[Tuple[str, str], Tuple[str, str]]:
        """Joint view over both sub-domains, keyed by (kind, symbol)."""
        joint = {("char", k): ("char", v) for k, v in self.char_map.items()}
        joint.update({("subtag", k): ("subtag", v) for k, v in self.subtag_map.items()})
        return joint

    def inverse(self) -> "CipherMap":
        return CipherMap(
            char_map={v: k for k, v in self.char_map.items()},
            subtag_map={v: k for k, v in self.subtag_map.items()},
            seed=self.seed,
        )

    def is_identity(self) -> bool:
        return all(k == v for k, v in self.char_map.items()) and all(
            k == v for k, v in self.subtag_map.items()
        )


def _permute(domain: Iterable[str], rng) -> Dict[str, str]:
    keys = sorted(domain)
    order = rng.permutation(len(keys))
    return {k: keys[i] for k, i in zip(keys, order)}


def make_cipher(char_domain: Iterable[str], subtag_domain: Iterable[str], seed: int) -> CipherMap:
    """
    Draw a uniformly random permutation of each domain.

    Raises:
        DataError: either domain is empty
    """
    chars = set(char_domain)
    subtags = set(subtag_domain)
    if not chars or not subtags:
        raise DataError("cipher domains must be non-empty")
    if any(len(c) != 1 for c in chars):
        raise DataError("character domain must contain single characters")

    rng = make_rng(seed)
    cipher = CipherMap(char_map=_permute(chars, rng), subtag_map=_permute(subtags, rng), seed=seed)
    logger.info(f"Cipher over {len(chars)} characters and {len(subtags)} subtags (seed {seed})")
    return cipher


def identity_cipher(char_domain: Iterable[str], subtag_domain: Iterable[str]) -> CipherMap:
    """Cipher that maps every symbol to itself."""
    return CipherMap(
        char_map={c: c for c in char_domain},
        subtag_map={t: t for t in subtag_domain},
        seed=-1,
    )


def cipher_domain(samples: Iterable[Sample]) -> Tuple[set, set]:
    """Characters (lemmata and forms) and subtags used by ``samples``."""
    chars, subtags = set(), set()
    for s in samples:
        chars.update(s.lemma)
        chars.update(s.form)
        subtags.update(s.tag.subtags)
    return chars, subtags


def _map_text(text: str, cipher: CipherMap) -> str:
    try:
        return "".join(cipher.char_map[c] for c in text)
    except KeyError as e:
        raise DataError(f"character {e.args[0]!r} is outside the cipher domain") from None


def apply_cipher(sample: Sample, cipher: CipherMap) -> Sample:
    """Map lemma, form and subtags pointwise; the language code is kept."""
    try:
        tag = MorphTag(tuple(cipher.subtag_map[t] for t in sample.tag.subtags))
    except KeyError as e:
        raise DataError(f"subtag {e.args[0]!r} is outside the cipher domain") from None
    return Sample(sample.language, _map_text(sample.lemma, cipher), tag, _map_text(sample.form, cipher))
