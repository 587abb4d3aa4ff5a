"""
Transflex - Experiment Specs
============================
Declarative description of one experiment, read from a ``key = value`` file
and overridable from the command line (flags win).

Example spec file::

    kind = transfer
    source_languages = pt, ar
    target_language = es
    n_t = 50
    seed = 1
    data_dir = ./unimorph
"""

import logging
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from config import get_settings
from corpus.synthetic import MAX_LEMMATA
from corpus.tags import UNIMORPH_SEPARATOR, validate_language_code
from utils.errors import DataError

logger = logging.getLogger(__name__)


class ExperimentKind(str, Enum):
    """Experiment families."""
    TRANSFER = "transfer"
    SHOT = "shot"
    CIPHER = "cipher"
    LEARNING_CURVE = "learning_curve"
    MONOLINGUAL = "monolingual"


LIST_FIELDS = ("source_languages", "curve_points")
MAPPING_FIELDS = ("data_paths", "n_s_overrides", "test_size_overrides")


def _setting(name: str):
    return lambda: getattr(get_settings(), name)


class ExperimentSpec(BaseModel):
    """One experiment: languages, sizes, seeds, data location and model/training overrides."""

    model_config = ConfigDict(extra="forbid", use_enum_values=False)

    kind: ExperimentKind
    target_language: str
    source_languages: List[str] = Field(default_factory=list)
    name: str = "run"

    # Sizes
    n_s: int = Field(default_factory=_setting("n_s"), ge=0)
    n_t: int = Field(default=50, ge=0)
    dev_size: int = Field(default_factory=_setting("dev_size"), ge=1)
    test_size: int = Field(default_factory=_setting("test_size"), ge=1)
    curve_points: List[int] = Field(default_factory=list)
    n_s_overrides: Dict[str, int] = Field(default_factory=dict)
    test_size_overrides: Dict[str, int] = Field(default_factory=dict)

    # Conditions
    include_baseline: bool = True
    combine_sources: bool = False
    exclude_overlapping_lemmata: bool = False

    # Seeds
    seed: int = 0
    cipher_seed: Optional[int] = None
    identity_cipher: bool = False

    # Data
    data_dir: Optional[str] = Field(default_factory=_setting("unimorph_dir"))
    data_paths: Dict[str, str] = Field(default_factory=dict)
    separator: str = UNIMORPH_SEPARATOR
    synthetic: bool = False
    synthetic_seed: int = 0
    synthetic_lemmata: int = Field(default=300, ge=1, le=MAX_LEMMATA)

    # Model and training
    hidden_size: int = Field(default_factory=_setting("hidden_size"), ge=1)
    embedding_size: int = Field(default_factory=_setting("embedding_size"), ge=1)
    epochs: int = Field(default_factory=_setting("epochs"), ge=0)
    batch_size: int = Field(default_factory=_setting("batch_size"), ge=1)
    eval_every: int = Field(default_factory=_setting("eval_every"), ge=1)
    selection: str = Field(default_factory=_setting("selection"))
    dropout: float = Field(default_factory=_setting("dropout"), ge=0.0, lt=1.0)
    clip_norm: Optional[float] = Field(default_factory=_setting("clip_norm"))
    beam_width: int = Field(default_factory=_setting("beam_width"), ge=1)
    workers: int = Field(default_factory=_setting("workers"), ge=1)

    # Output
    output_dir: Optional[str] = None

    @field_validator(*LIST_FIELDS, mode="before")
    @classmethod
    def _split_list(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [item.strip() for item in value.split(",") if item.strip()]
        return value

    @field_validator(*MAPPING_FIELDS, mode="before")
    @classmethod
    def _split_mapping(cls, value: Any) -> Any:
        if isinstance(value, str):
            mapping = {}
            for item in value.split(","):
                if not item.strip():
                    continue
                key, sep, val = item.partition(":")
                if not sep:
                    raise ValueError(f"expected 'language:value' entries, got {item.strip()!r}")
                mapping[key.strip()] = val.strip()
            return mapping
        return value

    @field_validator("target_language")
    @classmethod
    def _check_target(cls, value: str) -> str:
        return validate_language_code(value)

    @field_validator("source_languages")
    @classmethod
    def _check_sources(cls, value: List[str]) -> List[str]:
        for code in value:
            validate_language_code(code)
        if len(set(value)) != len(value):
            raise ValueError(f"duplicate source languages in {value}")
        return value

    @model_validator(mode="after")
    def _check_kind(self) -> "ExperimentSpec":
        if self.kind is ExperimentKind.MONOLINGUAL and self.source_languages:
            raise ValueError("a monolingual experiment takes no source languages")
        if self.kind in (ExperimentKind.TRANSFER, ExperimentKind.CIPHER) and not self.source_languages:
            raise ValueError(f"a {self.kind.value} experiment needs at least one source language")
        if self.kind is ExperimentKind.CIPHER and len(self.source_languages) != 1:
            raise ValueError("a cipher experiment takes exactly one source language")
        if self.target_language in self.source_languages:
            raise ValueError(f"target '{self.target_language}' is also listed as a source")
        return self

    @property
    def run_dir(self) -> Path:
        if self.output_dir:
            return Path(self.output_dir)
        return Path(get_settings().runs_dir) / self.name

    def n_s_for(self, language: str) -> int:
        return self.n_s_overrides.get(language, self.n_s)

    def test_size_for(self, language: str) -> int:
        return self.test_size_overrides.get(language, self.test_size)

    def to_lines(self) -> List[str]:
        """Echo as ``key = value`` lines, the same format the loader reads."""
        lines = []
        for key, value in self.model_dump().items():
            if isinstance(value, Enum):
                value = value.value
            elif isinstance(value, list):
                value = ", ".join(str(v) for v in value)
            elif isinstance(value, dict):
                value = ", ".join(f"{k}:{v}" for k, v in value.items())
            elif value is None:
                continue
            lines.append(f"{key} = {value}")
        return lines


def read_spec_file(path) -> Dict[str, str]:
    """Parse ``key = value`` lines; blank lines and ``#`` comments are skipped."""
    path = Path(path)
    entries: Dict[str, str] = {}
    with open(path, encoding="utf-8") as f:
        for number, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise DataError("expected 'key = value'", path=str(path), line=number)
            entries[key.strip()] = value.strip()
    return entries


def load_spec(path=None, overrides: Optional[Dict[str, Any]] = None, **defaults) -> ExperimentSpec:
    """
    Build a spec from an optional file, then ``defaults``, then ``overrides``.

    ``None`` values in ``overrides`` are ignored so unset flags never clobber
    the file.
    """
    values: Dict[str, Any] = dict(defaults)
    if path is not None:
        values.update(read_spec_file(path))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    spec = ExperimentSpec(**values)
    logger.info(f"Experiment '{spec.name}': {spec.kind.value} -> {spec.target_language}")
    return spec
