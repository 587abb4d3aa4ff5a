"""
Transflex - Dataset Construction
================================
Builds the train/dev/test splits for transfer runs, the one-/zero-shot split,
and the learning-curve grid. Every draw is a pure function of (inputs, seed).

Target-language draws and source-language draws use independent random streams,
so the same (target pool, seed) always yields the same dev/test sets and the same
first n_t target train samples regardless of the source condition or n_s.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set

import numpy as np
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt

from utils.errors import DataError
from utils.seeding import make_rng, file_digest
from .tags import MorphTag, parse_tag
from .unimorph import Sample, unique_pool

logger = logging.getLogger(__name__)

LEARNING_CURVE_SIZES = (100, 400, 800, 1600, 3200, 6400, 12000)

# Stream ids mixed into the seed for independent draws
_TARGET_STREAM = 0
_SOURCE_STREAM = 1
_SHOT_STREAM = 2

MANIFEST_SPLITS = ("train", "dev", "test")


@dataclass
class SplitMeta:
    """Counts, seed and provenance recorded alongside a split."""
    n_s: int
    n_t: int
    seed: int
    source_languages: List[str]
    target_language: str
    dev_size: int
    test_size: int
    exclude_overlapping_lemmata: bool = False
    digests: Dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, str]:
        """Flat string mapping for the sidecar metadata file."""
        data = {
            "n_s": str(self.n_s),
            "n_t": str(self.n_t),
            "seed": str(self.seed),
            "source_languages": ",".join(self.source_languages),
            "target_language": self.target_language,
            "dev_size": str(self.dev_size),
            "test_size": str(self.test_size),
            "exclude_overlapping_lemmata": str(self.exclude_overlapping_lemmata).lower(),
        }
        for name, digest in sorted(self.digests.items()):
            data[f"digest.{name}"] = digest
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, str]) -> "SplitMeta":
        """Create from the sidecar mapping."""
        sources = data.get("source_languages", "")
        return cls(
            n_s=int(data["n_s"]),
            n_t=int(data["n_t"]),
            seed=int(data["seed"]),
            source_languages=[s for s in sources.split(",") if s],
            target_language=data["target_language"],
            dev_size=int(data["dev_size"]),
            test_size=int(data["test_size"]),
            exclude_overlapping_lemmata=data.get("exclude_overlapping_lemmata") == "true",
            digests={k[len("digest."):]: v for k, v in data.items() if k.startswith("digest.")},
        )


@dataclass
class DatasetSplit:
    """Mixed-language train set plus target-only dev and test sets."""
    train: List[Sample]
    dev: List[Sample]
    test: List[Sample]
    meta: SplitMeta

    @property
    def target_train(self) -> List[Sample]:
        return [s for s in self.train if s.language == self.meta.target_language]

    @property
    def source_train(self) -> List[Sample]:
        return [s for s in self.train if s.language != self.meta.target_language]

    def all_samples(self) -> List[Sample]:
        return [*self.train, *self.dev, *self.test]

    def check_hygiene(self) -> None:
        """Raise DataError if the target (lemma, tag) sets of train, dev, test overlap."""
        train_keys = {s.key for s in self.target_train}
        dev_keys = {s.key for s in self.dev}
        test_keys = {s.key for s in self.test}
        for name, overlap in (
            ("train/dev", train_keys & dev_keys),
            ("train/test", train_keys & test_keys),
            ("dev/test", dev_keys & test_keys),
        ):
            if overlap:
                lemma, tag = sorted(overlap)[0]
                raise DataError(f"{name} overlap on ({lemma!r}, {tag}) and {len(overlap) - 1} more")


def learning_curve_sizes() -> List[int]:
    """Target train sizes of the learning-curve experiment."""
    return list(LEARNING_CURVE_SIZES)


def _single_language(samples: Sequence[Sample], role: str) -> str:
    languages = sorted({s.language for s in samples})
    if len(languages) != 1:
        raise DataError(f"{role} pool must hold exactly one language, found {languages or 'none'}")
    return languages[0]


def sample_source(
    source_samples: Sequence[Sample],
    n_s: int,
    seed: int,
    exclude_lemmata: Optional[Set[str]] = None,
) -> List[Sample]:
    """
    Draw n_s source samples uniformly without replacement.

    With ``exclude_lemmata`` the pool is first filtered; if fewer than n_s
    samples remain, all of them are used.
    """
    if n_s < 0:
        raise DataError(f"n_s must be >= 0, got {n_s}")
    if n_s == 0:
        return []

    pool = unique_pool(source_samples)
    if exclude_lemmata is not None:
        before = len(pool)
        pool = [s for s in pool if s.lemma not in exclude_lemmata]
        logger.info(f"Excluded {before - len(pool)} source samples sharing a lemma with the target")
        if len(pool) < n_s:
            logger.warning(f"Only {len(pool)} source samples remain after lemma exclusion (wanted {n_s})")
            n_s = len(pool)
    elif len(pool) < n_s:
        raise DataError(f"insufficient source pool: required {n_s}, available {len(pool)}")

    rng = make_rng(seed, _SOURCE_STREAM)
    order = rng.permutation(len(pool))[:n_s]
    return [pool[i] for i in order]


def sample_transfer_dataset(
    source_samples: Sequence[Sample],
    target_samples: Sequence[Sample],
    n_s: int,
    n_t: int,
    dev_size: int,
    test_size: int,
    seed: int,
    exclude_overlapping_lemmata: bool = False,
) -> DatasetSplit:
    """
    Build a transfer split.

    Dev and test are drawn first from the shuffled target pool, then the n_t
    target train samples, so dev/test are shared across every n_t and every
    source condition for a given (target pool, seed).

    Args:
        source_samples: High-resource pool (may be empty when n_s = 0)
        target_samples: Low-resource pool, one language
        n_s: Source train samples (0 = monolingual baseline)
        n_t: Target train samples
        dev_size: Target dev samples
        test_size: Target test samples
        seed: Split seed
        exclude_overlapping_lemmata: Drop source samples whose lemma occurs in target data

    Returns:
        DatasetSplit with train = source draw followed by target draw
    """
    if n_t < 0:
        raise DataError(f"n_t must be >= 0, got {n_t}")
    if dev_size <= 0 or test_size <= 0:
        raise DataError(f"dev_size and test_size must be positive, got {dev_size} and {test_size}")

    target_pool = unique_pool(target_samples)
    target_language = _single_language(target_pool, "target")
    required = n_t + dev_size + test_size
    if len(target_pool) < required:
        raise DataError(
            f"insufficient target pool for '{target_language}': required {required} "
            f"(n_t={n_t} + dev={dev_size} + test={test_size}), available {len(target_pool)}"
        )

    rng = make_rng(seed, _TARGET_STREAM)
    order = rng.permutation(len(target_pool))
    dev = [target_pool[i] for i in order[:dev_size]]
    test = [target_pool[i] for i in order[dev_size:dev_size + test_size]]
    start = dev_size + test_size
    target_train = [target_pool[i] for i in order[start:start + n_t]]

    exclude = None
    if exclude_overlapping_lemmata:
        exclude = {s.lemma for s in (*dev, *test, *target_train)}
    source_train = sample_source(source_samples, n_s, seed, exclude_lemmata=exclude)
    source_languages = sorted({s.language for s in source_train})
    if target_language in source_languages:
        raise DataError(f"source and target share language code '{target_language}'")

    split = DatasetSplit(
        train=[*source_train, *target_train],
        dev=dev,
        test=test,
        meta=SplitMeta(
            n_s=len(source_train),
            n_t=n_t,
            seed=seed,
            source_languages=source_languages,
            target_language=target_language,
            dev_size=dev_size,
            test_size=test_size,
            exclude_overlapping_lemmata=exclude_overlapping_lemmata,
        ),
    )
    split.check_hygiene()
    logger.info(
        f"Built split {'+'.join(source_languages) or '0'}->{target_language}: "
        f"n_s={len(source_train)} n_t={n_t} dev={dev_size} test={test_size} seed={seed}"
    )
    return split


class ShotClass(Enum):
    """How often an evaluation sample's tag was seen in target training."""
    ONE_SHOT = "one-shot"
    ZERO_SHOT = "zero-shot"


@dataclass(frozen=True)
class ShotSample:
    """Evaluation sample annotated with its shot class."""
    sample: Sample
    shot_class: ShotClass


@dataclass
class ShotSplit:
    """One training sample for half of the target tags, none for the rest."""
    train: List[Sample]
    seen_tags: FrozenSet[MorphTag]
    unseen_tags: FrozenSet[MorphTag]
    eval: List[ShotSample]

    def classify(self, sample: Sample) -> ShotClass:
        return ShotClass.ONE_SHOT if sample.tag in self.seen_tags else ShotClass.ZERO_SHOT

    def annotate(self, samples: Iterable[Sample]) -> List[ShotSample]:
        return [ShotSample(s, self.classify(s)) for s in samples]


class _LemmaCollision(Exception):
    """A seen tag has no sample left whose lemma is unused."""


def _draw_one_per_tag(
    by_tag: Dict[MorphTag, List[Sample]],
    seen_order: Sequence[MorphTag],
    rng: np.random.Generator,
) -> List[Sample]:
    used_lemmata: Set[str] = set()
    train: List[Sample] = []
    for tag in seen_order:
        candidates = [s for s in by_tag[tag] if s.lemma not in used_lemmata]
        if not candidates:
            raise _LemmaCollision(f"no unused lemma left for tag {tag}")
        choice = candidates[int(rng.integers(len(candidates)))]
        used_lemmata.add(choice.lemma)
        train.append(choice)
    return train


def make_shot_split(target_samples: Sequence[Sample], seed: int, max_attempts: int = 25) -> ShotSplit:
    """
    Partition target tags into seen/unseen halves and draw one sample per seen tag.

    The seen half takes floor(|tags| / 2). Train lemmata are pairwise distinct;
    a draw that runs out of unused lemmata is retried with fresh randomness.

    Raises:
        DataError: fewer than two tags, or the distinct-lemma constraint
            cannot be met within ``max_attempts`` draws
    """
    pool = unique_pool(target_samples)
    tags = sorted({s.tag for s in pool})
    if len(tags) < 2:
        raise DataError(f"shot split needs at least 2 distinct tags, found {len(tags)}")

    rng = make_rng(seed, _SHOT_STREAM)
    permuted = [tags[i] for i in rng.permutation(len(tags))]
    n_seen = len(tags) // 2
    seen_order = permuted[:n_seen]

    by_tag: Dict[MorphTag, List[Sample]] = {}
    for s in pool:
        by_tag.setdefault(s.tag, []).append(s)

    retrying = Retrying(
        stop=stop_after_attempt(max_attempts),
        retry=retry_if_exception_type(_LemmaCollision),
        reraise=True,
    )
    try:
        train = retrying(_draw_one_per_tag, by_tag, seen_order, rng)
    except _LemmaCollision as e:
        raise DataError(
            f"cannot draw one-shot train set with distinct lemmata after {max_attempts} attempts "
            f"({e}); try a different seed"
        ) from e

    train_keys = {s.key for s in train}
    split = ShotSplit(
        train=train,
        seen_tags=frozenset(seen_order),
        unseen_tags=frozenset(permuted[n_seen:]),
        eval=[],
    )
    split.eval = split.annotate(s for s in pool if s.key not in train_keys)
    logger.info(
        f"Shot split: {len(tags)} tags, {n_seen} seen, {len(split.eval)} eval samples "
        f"({sum(1 for e in split.eval if e.shot_class is ShotClass.ZERO_SHOT)} zero-shot)"
    )
    return split


def write_split_manifest(directory, split: DatasetSplit, source_files: Optional[Dict[str, str]] = None) -> Path:
    """
    Write ``splits.tsv`` (``split<TAB>language<TAB>lemma<TAB>form<TAB>tag``) and
    the ``splits.meta`` sidecar (seed, sizes, source file digests).

    Returns:
        Path of the TSV manifest
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for language, path in (source_files or {}).items():
        split.meta.digests[language] = file_digest(path)

    manifest = directory / "splits.tsv"
    with open(manifest, "w", encoding="utf-8", newline="\n") as f:
        for name, samples in (("train", split.train), ("dev", split.dev), ("test", split.test)):
            for s in samples:
                f.write("\t".join([name, s.language, s.lemma, s.form, str(s.tag)]) + "\n")

    with open(directory / "splits.meta", "w", encoding="utf-8", newline="\n") as f:
        for key, value in split.meta.to_dict().items():
            f.write(f"{key} = {value}\n")

    logger.info(f"Wrote split manifest to {manifest}")
    return manifest


def read_split_manifest(directory) -> DatasetSplit:
    """Load a split written by write_split_manifest."""
    directory = Path(directory)
    manifest = directory / "splits.tsv"
    parts: Dict[str, List[Sample]] = {name: [] for name in MANIFEST_SPLITS}
    with open(manifest, encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            columns = line.split("\t")
            if len(columns) != 5 or columns[0] not in parts:
                raise DataError("malformed split manifest row", path=str(manifest), line=number)
            name, language, lemma, form, raw_tag = columns
            parts[name].append(Sample(language, lemma, parse_tag(raw_tag, line=number), form))

    meta: Dict[str, str] = {}
    with open(directory / "splits.meta", encoding="utf-8") as f:
        for line in f:
            if "=" in line:
                key, value = line.split("=", 1)
                meta[key.strip()] = value.strip()

    return DatasetSplit(parts["train"], parts["dev"], parts["test"], SplitMeta.from_dict(meta))


def target_stream_lines(samples: Iterable[Sample], target_language: str) -> List[str]:
    """Target-language samples rendered one per line, for stream digests."""
    return ["\t".join(s.to_fields()) for s in samples if s.language == target_language]
