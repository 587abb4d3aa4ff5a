"""
Transflex - Corpus Module
=========================
Paradigm ingestion, tag parsing, dataset construction and the source cipher.
"""

from .tags import MorphTag, parse_tag, validate_language_code, CAMEL_CASE, UNIMORPH_SEPARATOR
from .unimorph import Sample, Paradigm, load_unimorph, group_paradigms, flatten_paradigms, unique_pool
from .splits import (
    SplitMeta,
    DatasetSplit,
    ShotClass,
    ShotSample,
    ShotSplit,
    learning_curve_sizes,
    sample_source,
    sample_transfer_dataset,
    make_shot_split,
    write_split_manifest,
    read_split_manifest,
)
from .cipher import CipherMap, make_cipher, identity_cipher, cipher_domain, apply_cipher
from .synthetic import SyntheticFamily, make_synthetic_family, RELATED_A, RELATED_B, UNRELATED, MAX_LEMMATA

__all__ = [
    "MorphTag",
    "parse_tag",
    "validate_language_code",
    "CAMEL_CASE",
    "UNIMORPH_SEPARATOR",
    "Sample",
    "Paradigm",
    "load_unimorph",
    "group_paradigms",
    "flatten_paradigms",
    "unique_pool",
    "SplitMeta",
    "DatasetSplit",
    "ShotClass",
    "ShotSample",
    "ShotSplit",
    "learning_curve_sizes",
    "sample_source",
    "sample_transfer_dataset",
    "make_shot_split",
    "write_split_manifest",
    "read_split_manifest",
    "CipherMap",
    "make_cipher",
    "identity_cipher",
    "cipher_domain",
    "apply_cipher",
    "SyntheticFamily",
    "make_synthetic_family",
    "RELATED_A",
    "RELATED_B",
    "UNRELATED",
    "MAX_LEMMATA",
]
