"""
Transflex - Experiment Runner
=============================
Runs the experiment families end to end:

- transfer: one model per source condition ("0" = no source) on shared target data
- learning curve: the transfer grid over a sweep of target train sizes
- shot: one sample for half of the target tags, none for the rest
- cipher: the same split trained once raw and once with the source enciphered

Every cell writes its split manifest, train log and checkpoint under the run
directory; the run directory gets results.tsv, summary.txt and manifest.txt.
"""

import logging
import re
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd

from config import get_settings
from corpus.cipher import apply_cipher, cipher_domain, identity_cipher, make_cipher
from corpus.splits import (
    DatasetSplit,
    learning_curve_sizes,
    make_shot_split,
    sample_source,
    sample_transfer_dataset,
    target_stream_lines,
    write_split_manifest,
)
from corpus.synthetic import SyntheticFamily, make_synthetic_family
from corpus.unimorph import Sample, load_unimorph
from encoding.vocab import build_vocab, encode_input
from evaluation.metrics import EvalReport, evaluate, shot_report
from model.decoding import decode_many
from training.checkpoint import Checkpoint
from training.trainer import SELECTED_CHECKPOINT, TrainConfig, make_model_config, train
from utils.errors import DataError, TransflexError
from utils.seeding import SeedBundle, expand_seed, stream_digest
from .reporting import (
    write_curve_csv,
    write_frame,
    write_learning_curve_chart,
    write_manifest,
    write_results,
    write_summary,
)
from .spec import ExperimentKind, ExperimentSpec

logger = logging.getLogger(__name__)

BASELINE = "0"


@dataclass
class ResultRow:
    """One cell of a results table."""
    source: str
    target: str
    n_t: int
    accuracy: float
    mean_edit_distance: float
    checkpoint: str
    wall_time: float = 0.0
    n_s: int = 0
    seed: int = 0
    ciphered: bool = False

    @property
    def label(self) -> str:
        return f"{self.source} ciph" if self.ciphered else self.source

    def to_dict(self) -> Dict:
        """Deterministic fields only (no wall time)."""
        return {
            "source": self.source,
            "ciph": "yes" if self.ciphered else "no",
            "target": self.target,
            "n_s": self.n_s,
            "n_t": self.n_t,
            "seed": self.seed,
            "acc": self.accuracy,
            "ed": self.mean_edit_distance,
            "checkpoint": self.checkpoint,
        }


@dataclass
class ShotResult:
    """One-/zero-shot evaluation of one source condition."""
    source: str
    target: str
    report: EvalReport
    checkpoint: str
    wall_time: float = 0.0

    def frame_rows(self) -> List[Dict]:
        rows = []
        for _, item in self.report.to_frame().iterrows():
            rows.append({"source": self.source, "target": self.target, **item.to_dict()})
        return rows


@dataclass
class CellOutcome:
    row: ResultRow
    checkpoint: Checkpoint
    predictions: List[str]
    target_digest: str


class CorpusPool:
    """Loads and caches each language's samples for one spec."""

    def __init__(self, spec: ExperimentSpec):
        self.spec = spec
        self._samples: Dict[str, List[Sample]] = {}
        self._paths: Dict[str, str] = {}
        self._family: Optional[SyntheticFamily] = None

    def path_for(self, language: str) -> Path:
        spec = self.spec
        if language in spec.data_paths:
            return Path(spec.data_paths[language])
        if spec.data_dir is None:
            raise DataError(f"no data path for '{language}' and no data_dir configured")
        base = Path(spec.data_dir)
        for candidate in (base / language, base / f"{language}.tsv", base / language / language):
            if candidate.is_file():
                return candidate
        raise DataError(f"no corpus file for '{language}' under {base}")

    def samples(self, language: str) -> List[Sample]:
        if language not in self._samples:
            if self.spec.synthetic:
                if self._family is None:
                    self._family = make_synthetic_family(self.spec.synthetic_seed, self.spec.synthetic_lemmata)
                try:
                    self._samples[language] = list(self._family[language])
                except KeyError:
                    raise DataError(f"synthetic family has no language '{language}'") from None
            else:
                path = self.path_for(language)
                self._samples[language] = load_unimorph(path, language, self.spec.separator)
                self._paths[language] = str(path)
        return self._samples[language]

    @property
    def source_files(self) -> Dict[str, str]:
        return dict(self._paths)


def seeds_for(spec: ExperimentSpec) -> SeedBundle:
    bundle = expand_seed(spec.seed)
    if spec.cipher_seed is not None:
        bundle = SeedBundle(bundle.master, bundle.split, bundle.init, bundle.shuffle, spec.cipher_seed)
    return bundle


def conditions(spec: ExperimentSpec) -> List[Tuple[str, List[str]]]:
    """(label, source languages) per condition: "0" first, then sources in spec order."""
    out: List[Tuple[str, List[str]]] = []
    if spec.include_baseline or not spec.source_languages:
        out.append((BASELINE, []))
    if spec.combine_sources and spec.source_languages:
        out.append(("+".join(spec.source_languages), list(spec.source_languages)))
    else:
        out.extend((lang, [lang]) for lang in spec.source_languages)
    return out


def _source_pool(pool: CorpusPool, spec: ExperimentSpec, sources: Sequence[str], seed: int) -> Tuple[List[Sample], int]:
    """Samples the split draws its source part from, and how many to draw."""
    if not sources:
        return [], 0
    if len(sources) == 1:
        return pool.samples(sources[0]), spec.n_s_for(sources[0])
    drawn: List[Sample] = []
    for index, language in enumerate(sources):
        drawn.extend(sample_source(pool.samples(language), spec.n_s_for(language), seed + index))
    return drawn, len(drawn)


def build_split(spec: ExperimentSpec, pool: CorpusPool, sources: Sequence[str], n_t: int, seeds: SeedBundle) -> DatasetSplit:
    source_samples, n_s = _source_pool(pool, spec, sources, seeds.split)
    target = spec.target_language
    return sample_transfer_dataset(
        source_samples,
        pool.samples(target),
        n_s=n_s,
        n_t=n_t,
        dev_size=spec.dev_size,
        test_size=spec.test_size_for(target),
        seed=seeds.split,
        exclude_overlapping_lemmata=spec.exclude_overlapping_lemmata,
    )


def cell_name(label: str, n_t: int) -> str:
    slug = "src-" + re.sub(r"[^a-z0-9+]+", "-", label.lower()).strip("-")
    return f"{slug}_nt{n_t}"


def train_config_for(spec: ExperimentSpec, seeds: SeedBundle, checkpoint_dir: Optional[Path]) -> TrainConfig:
    return TrainConfig.from_settings(
        epochs=spec.epochs,
        batch_size=spec.batch_size,
        seed=seeds.init,
        shuffle_seed=seeds.shuffle,
        eval_every=spec.eval_every,
        selection=spec.selection,
        dropout=spec.dropout,
        clip_norm=spec.clip_norm,
        workers=spec.workers,
        checkpoint_dir=str(checkpoint_dir) if checkpoint_dir else None,
    )


def run_cell(
    spec: ExperimentSpec,
    label: str,
    split: DatasetSplit,
    seeds: SeedBundle,
    run_dir: Path,
    source_files: Optional[Dict[str, str]] = None,
    ciphered: bool = False,
    eval_samples: Optional[Sequence[Sample]] = None,
) -> CellOutcome:
    """Train one model on ``split`` and score it on the test set (or ``eval_samples``)."""
    started = time.perf_counter()
    cell = cell_name(label + (" ciph" if ciphered else ""), split.meta.n_t)
    cell_dir = run_dir / cell
    write_split_manifest(cell_dir, split, source_files)

    vocab = build_vocab(split.all_samples())
    vocab.save(cell_dir / "vocab.txt")
    settings = get_settings()
    model_config = make_model_config(
        vocab, split.train, spec.hidden_size, spec.embedding_size, settings.decode_margin, settings.decoder_init_range
    )
    checkpoint = train(split, model_config, train_config_for(spec, seeds, cell_dir), vocab)

    eval_samples = split.test if eval_samples is None else eval_samples
    predictions = predict(checkpoint, eval_samples, spec.beam_width, spec.workers)
    report = evaluate(predictions, [s.form for s in eval_samples], tags=[s.tag for s in eval_samples])
    _write_predictions(cell_dir / "predictions.tsv", eval_samples, predictions)
    write_frame(report.per_tag, cell_dir / "per_tag.tsv")

    digest = stream_digest(target_stream_lines(split.train, split.meta.target_language))
    row = ResultRow(
        source=label,
        target=split.meta.target_language,
        n_t=split.meta.n_t,
        accuracy=report.accuracy,
        mean_edit_distance=report.mean_edit_distance,
        checkpoint=f"{cell}/{SELECTED_CHECKPOINT}",
        wall_time=time.perf_counter() - started,
        n_s=split.meta.n_s,
        seed=spec.seed,
        ciphered=ciphered,
    )
    logger.info(
        f"Cell {row.label} -> {row.target} (n_t={row.n_t}): acc {row.accuracy:.4f}, ED {row.mean_edit_distance:.2f}"
    )
    return CellOutcome(row, checkpoint, predictions, digest)


def predict(checkpoint: Checkpoint, samples: Sequence[Sample], beam_width: int = 1, workers: int = 1) -> List[str]:
    vocab = checkpoint.vocab
    results = decode_many(checkpoint.model(), [encode_input(s, vocab) for s in samples], vocab, beam_width, workers=workers)
    return [r.form for r in results]


def _write_predictions(path: Path, samples: Sequence[Sample], predictions: Sequence[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for sample, prediction in zip(samples, predictions):
            f.write("\t".join([sample.language, sample.lemma, str(sample.tag), sample.form, prediction]) + "\n")


def _check_target_streams(outcomes: Sequence[CellOutcome], what: str) -> Dict[str, str]:
    """Every condition at one n_t must train on the same target samples."""
    digests = {f"{o.row.label} n_t={o.row.n_t}": o.target_digest for o in outcomes}
    for n_t in sorted({o.row.n_t for o in outcomes}):
        distinct = {o.target_digest for o in outcomes if o.row.n_t == n_t}
        if len(distinct) > 1:
            logger.error(f"{what}: target training streams differ across conditions at n_t={n_t}")
            raise TransflexError(f"{what}: target training streams differ across conditions at n_t={n_t}")
    return digests


def _finish(
    spec: ExperimentSpec,
    run_dir: Path,
    rows: List[ResultRow],
    pool: CorpusPool,
    seeds: SeedBundle,
    digests: Dict[str, str],
    title: str,
    notes: Sequence[str] = (),
    shot_frame: Optional[pd.DataFrame] = None,
) -> None:
    write_results(rows, run_dir / "results.tsv")
    write_summary(rows, run_dir / "summary.txt", title, notes, shot_frame)
    write_manifest(
        run_dir / "manifest.txt",
        {
            "spec": dict(line.split(" = ", 1) for line in spec.to_lines()),
            "seeds": seeds.to_dict(),
            "files": {lang: path for lang, path in sorted(pool.source_files.items())},
            "target_streams": digests,
        },
    )


def run_transfer(spec: ExperimentSpec) -> List[ResultRow]:
    """One row per source condition at ``spec.n_t``, all on the same target data."""
    seeds = seeds_for(spec)
    pool = CorpusPool(spec)
    run_dir = spec.run_dir
    outcomes = []
    for label, sources in conditions(spec):
        split = build_split(spec, pool, sources, spec.n_t, seeds)
        outcomes.append(run_cell(spec, label, split, seeds, run_dir, pool.source_files))
    digests = _check_target_streams(outcomes, "transfer")
    rows = [o.row for o in outcomes]
    _finish(spec, run_dir, rows, pool, seeds, digests, f"Transfer to {spec.target_language} (n_t={spec.n_t})")
    return rows


def run_learning_curve(spec: ExperimentSpec) -> List[ResultRow]:
    """
    One row per (condition, n_t) over the standard sizes plus ``curve_points``.
    Points the target pool cannot supply are skipped with a warning and listed
    in the summary.
    """
    seeds = seeds_for(spec)
    pool = CorpusPool(spec)
    run_dir = spec.run_dir
    sizes = sorted(set(learning_curve_sizes()) | set(spec.curve_points))
    outcomes: List[CellOutcome] = []
    skipped: List[str] = []
    for n_t in sizes:
        for label, sources in conditions(spec):
            try:
                split = build_split(spec, pool, sources, n_t, seeds)
            except DataError as e:
                logger.warning(f"Skipping {label} at n_t={n_t}: {e}")
                skipped.append(f"skipped {label} n_t={n_t}: {e}")
                continue
            outcomes.append(run_cell(spec, label, split, seeds, run_dir, pool.source_files))
    digests = _check_target_streams(outcomes, "learning curve")
    rows = sorted((o.row for o in outcomes), key=lambda r: r.n_t)
    _finish(spec, run_dir, rows, pool, seeds, digests, f"Learning curve for {spec.target_language}", skipped)
    write_curve_csv(rows, run_dir / "curve.csv")
    write_learning_curve_chart(rows, spec.target_language, run_dir / "curve.html")
    return rows


def run_shot(spec: ExperimentSpec) -> List[ShotResult]:
    """
    Per source condition: dev/test come from the target pool as in a transfer
    split with no target train samples, then the shot split draws one sample
    per seen tag from the rest of the pool. The test set is annotated with
    shot classes and scored per class.
    """
    seeds = seeds_for(spec)
    pool = CorpusPool(spec)
    run_dir = spec.run_dir
    results: List[ShotResult] = []
    outcomes: List[CellOutcome] = []
    for label, sources in conditions(spec):
        base = build_split(spec, pool, sources, 0, seeds)
        held_out = {s.key for s in (*base.dev, *base.test)}
        shot = make_shot_split([s for s in pool.samples(spec.target_language) if s.key not in held_out], seeds.split)
        annotated = shot.annotate(base.test)

        meta = replace(base.meta, n_t=len(shot.train), digests={})
        split = DatasetSplit(train=[*base.source_train, *shot.train], dev=base.dev, test=base.test, meta=meta)
        split.check_hygiene()
        outcome = run_cell(spec, label, split, seeds, run_dir, pool.source_files)
        report = shot_report(annotated, outcome.predictions)
        outcomes.append(outcome)
        results.append(ShotResult(label, spec.target_language, report, outcome.row.checkpoint, outcome.row.wall_time))

    digests = _check_target_streams(outcomes, "shot")
    shot_frame = pd.DataFrame([r for result in results for r in result.frame_rows()])
    write_frame(shot_frame, run_dir / "shot_results.tsv")
    _finish(
        spec, run_dir, [o.row for o in outcomes], pool, seeds, digests,
        f"One-/zero-shot transfer to {spec.target_language}", shot_frame=shot_frame,
    )
    return results


def encipher_split(split: DatasetSplit, cipher) -> DatasetSplit:
    """Apply ``cipher`` to the source-language train samples; target data is untouched."""
    target = split.meta.target_language
    train = [s if s.language == target else apply_cipher(s, cipher) for s in split.train]
    return DatasetSplit(train=train, dev=split.dev, test=split.test, meta=split.meta)


def run_cipher(spec: ExperimentSpec) -> List[ResultRow]:
    """Two rows on one split: the raw source and the enciphered source."""
    seeds = seeds_for(spec)
    pool = CorpusPool(spec)
    run_dir = spec.run_dir
    source = spec.source_languages[0]
    split = build_split(spec, pool, [source], spec.n_t, seeds)

    chars, subtags = cipher_domain(split.source_train)
    cipher = identity_cipher(chars, subtags) if spec.identity_cipher else make_cipher(chars, subtags, seeds.cipher)
    original = run_cell(spec, source, split, seeds, run_dir, pool.source_files)
    ciphered = run_cell(spec, source, encipher_split(split, cipher), seeds, run_dir, pool.source_files, ciphered=True)

    digests = _check_target_streams([original, ciphered], "cipher")
    logger.info(f"Target stream digests: original {original.target_digest[:12]}, ciphered {ciphered.target_digest[:12]}")
    rows = [original.row, ciphered.row]
    _finish(
        spec, run_dir, rows, pool, seeds, digests,
        f"Cipher experiment {source} -> {spec.target_language} (n_t={spec.n_t})",
        [f"cipher seed {cipher.seed}, identity {cipher.is_identity()}"],
    )
    return rows


def run_experiment(spec: ExperimentSpec):
    """Dispatch on ``spec.kind``."""
    runners = {
        ExperimentKind.TRANSFER: run_transfer,
        ExperimentKind.MONOLINGUAL: run_transfer,
        ExperimentKind.LEARNING_CURVE: run_learning_curve,
        ExperimentKind.SHOT: run_shot,
        ExperimentKind.CIPHER: run_cipher,
    }
    return runners[spec.kind](spec)
