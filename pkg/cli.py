"""
Transflex - Command Line
========================
Entry point for data preparation, training, decoding, evaluation, the
experiment families and the gradient check.

    python cli.py prepare --synthetic --target-language synb --source-languages syna --out prepared
    python cli.py train --split prepared/src-syna_nt50 --out model
    python cli.py decode --checkpoint model/model.ckpt --input queries.tsv
    python cli.py exp transfer --spec es.spec --seed 2
    python cli.py gradcheck

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

from pydantic import ValidationError

from config import get_settings
from corpus.splits import read_split_manifest, write_split_manifest
from corpus.tags import parse_tag
from encoding.vocab import SymbolVocab, build_vocab, encode_query
from evaluation.metrics import evaluate, format_aligned, report_lines
from experiments.reporting import summary_table, write_frame
from experiments.runner import (
    CorpusPool,
    build_split,
    cell_name,
    conditions,
    predict,
    run_experiment,
    seeds_for,
)
from experiments.spec import ExperimentKind, ExperimentSpec, load_spec, read_spec_file
from model.decoding import decode_many
from model.network import INIT_UNIFORM, ModelConfig, build_model, toy_batch
from numerics.gradcheck import DEFAULT_STEP, DEFAULT_TOLERANCE, ERROR_FLOOR, grad_check
from training.checkpoint import load_checkpoint
from training.trainer import TrainConfig, make_model_config, train
from utils.errors import DataError, NumericalError, TransflexError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

EXPERIMENT_KINDS = {
    "transfer": ExperimentKind.TRANSFER,
    "shot": ExperimentKind.SHOT,
    "cipher": ExperimentKind.CIPHER,
    "curve": ExperimentKind.LEARNING_CURVE,
}


class TransflexParser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_spec_flags(parser: argparse.ArgumentParser) -> None:
    """One ``--field-name`` flag per ExperimentSpec field; values are validated by ExperimentSpec."""
    parser.add_argument("--spec", help="Experiment spec file (key = value lines)")
    for name, field in ExperimentSpec.model_fields.items():
        if name == "kind":
            continue
        flag = "--" + name.replace("_", "-")
        if field.annotation is bool:
            parser.add_argument(flag, dest=name, nargs="?", const="true", default=None)
        else:
            parser.add_argument(flag, dest=name, default=None)


def _spec_overrides(args: argparse.Namespace) -> Dict[str, Optional[str]]:
    return {name: getattr(args, name, None) for name in ExperimentSpec.model_fields if name != "kind"}


def _load_spec(args: argparse.Namespace, kind: ExperimentKind) -> ExperimentSpec:
    overrides = _spec_overrides(args)
    overrides["kind"] = kind
    if kind is ExperimentKind.TRANSFER:
        from_file = read_spec_file(args.spec) if args.spec else {}
        if not (overrides.get("source_languages") or from_file.get("source_languages")):
            overrides["kind"] = ExperimentKind.MONOLINGUAL
    return load_spec(args.spec, overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = TransflexParser(prog="transflex", description="Cross-lingual paradigm completion")
    parser.add_argument("--log-level", default=None, help="Overrides TRANSFLEX_LOG_LEVEL")
    commands = parser.add_subparsers(dest="command", parser_class=TransflexParser)
    commands.required = True

    prepare = commands.add_parser("prepare", help="Sample splits and vocabularies for each source condition")
    _add_spec_flags(prepare)
    prepare.add_argument("--out", required=True, help="Directory to write split directories into")
    prepare.add_argument("--write-corpora", action="store_true", help="Also write the language pools as TSV files")

    train_cmd = commands.add_parser("train", help="Train one model on a prepared split")
    train_cmd.add_argument("--split", required=True, help="Directory holding splits.tsv and splits.meta")
    train_cmd.add_argument("--out", required=True, help="Checkpoint directory")
    train_cmd.add_argument("--resume", help="Checkpoint to resume from")
    train_cmd.add_argument("--seed", type=int, default=0)
    train_cmd.add_argument("--epochs", type=int)
    train_cmd.add_argument("--batch-size", type=int)
    train_cmd.add_argument("--eval-every", type=int)
    train_cmd.add_argument("--selection")
    train_cmd.add_argument("--dropout", type=float)
    train_cmd.add_argument("--clip-norm", type=float)
    train_cmd.add_argument("--hidden-size", type=int)
    train_cmd.add_argument("--embedding-size", type=int)
    train_cmd.add_argument("--precision", choices=["float64", "float32"])
    train_cmd.add_argument("--workers", type=int)

    decode = commands.add_parser("decode", help="Predict forms for language<TAB>lemma<TAB>tag lines")
    decode.add_argument("--checkpoint", required=True)
    decode.add_argument("--input", required=True, help="Query TSV, or - for stdin")
    decode.add_argument("--output", help="Output TSV (default: stdout)")
    decode.add_argument("--vocab", help="Vocabulary file the checkpoint must match")
    decode.add_argument("--beam-width", type=int, default=None)
    decode.add_argument("--separator", default=";")
    decode.add_argument("--workers", type=int, default=None)

    evaluate_cmd = commands.add_parser("evaluate", help="Score a checkpoint on a prepared split's test set")
    evaluate_cmd.add_argument("--checkpoint", required=True)
    evaluate_cmd.add_argument("--split", required=True)
    evaluate_cmd.add_argument("--beam-width", type=int, default=None)
    evaluate_cmd.add_argument("--per-tag", help="Write the per-tag table to this TSV")
    evaluate_cmd.add_argument("--workers", type=int, default=None)

    exp = commands.add_parser("exp", help="Run an experiment family")
    families = exp.add_subparsers(dest="family", parser_class=TransflexParser)
    families.required = True
    for family in EXPERIMENT_KINDS:
        _add_spec_flags(families.add_parser(family))

    gradcheck = commands.add_parser("gradcheck", help="Finite-difference check of the model gradients")
    gradcheck.add_argument("--seed", type=int, default=0)
    gradcheck.add_argument("--hidden-size", type=int, default=4)
    gradcheck.add_argument("--embedding-size", type=int, default=5)
    gradcheck.add_argument("--input-vocab", type=int, default=12)
    gradcheck.add_argument("--output-vocab", type=int, default=10)
    gradcheck.add_argument("--batch", type=int, default=3)
    gradcheck.add_argument("--max-length", type=int, default=6)
    gradcheck.add_argument("--init-range", type=float, default=0.5, help="Uniform init range of every parameter")
    gradcheck.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE)
    gradcheck.add_argument("--step", type=float, default=DEFAULT_STEP)
    gradcheck.add_argument("--floor", type=float, default=ERROR_FLOOR)
    return parser


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------

def _write_pool(path: Path, samples) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for s in samples:
            f.write(f"{s.lemma}\t{s.form}\t{s.tag}\n")


def cmd_prepare(args) -> int:
    spec = _load_spec(args, ExperimentKind.TRANSFER)
    out = Path(args.out)
    pool = CorpusPool(spec)
    seeds = seeds_for(spec)
    for label, sources in conditions(spec):
        split = build_split(spec, pool, sources, spec.n_t, seeds)
        directory = out / cell_name(label, spec.n_t)
        write_split_manifest(directory, split, pool.source_files)
        build_vocab(split.all_samples()).save(directory / "vocab.txt")
        print(f"{label}\t{directory}")
    if args.write_corpora:
        corpora = out / "corpora"
        corpora.mkdir(parents=True, exist_ok=True)
        for language in [spec.target_language, *spec.source_languages]:
            _write_pool(corpora / f"{language}.tsv", pool.samples(language))
        logger.info(f"Wrote language pools to {corpora}")
    return EXIT_OK


def cmd_train(args) -> int:
    settings = get_settings()
    split_dir = Path(args.split)
    split = read_split_manifest(split_dir)
    vocab_path = split_dir / "vocab.txt"
    vocab = SymbolVocab.load(vocab_path) if vocab_path.is_file() else build_vocab(split.all_samples())
    model_config = make_model_config(
        vocab,
        split.train,
        args.hidden_size or settings.hidden_size,
        args.embedding_size or settings.embedding_size,
        settings.decode_margin,
        settings.decoder_init_range,
    )
    train_config = TrainConfig.from_settings(
        seed=args.seed,
        epochs=args.epochs,
        batch_size=args.batch_size,
        eval_every=args.eval_every,
        selection=args.selection,
        dropout=args.dropout,
        clip_norm=args.clip_norm,
        precision=args.precision,
        workers=args.workers,
        checkpoint_dir=args.out,
    )
    checkpoint = train(split, model_config, train_config, vocab, resume_from=args.resume)
    metrics = ", ".join(f"{k}={v:.4f}" for k, v in sorted(checkpoint.metrics.items()))
    print(f"epoch {checkpoint.epoch}: {metrics}")
    return EXIT_OK


def _read_queries(lines, separator: str):
    queries = []
    for number, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")
        if not line:
            continue
        columns = line.split("\t")
        if len(columns) < 3:
            raise DataError("expected language<TAB>lemma<TAB>tag", path="decode input", line=number)
        language, lemma, raw_tag = columns[:3]
        queries.append((columns[:3], language, lemma, parse_tag(raw_tag, separator, line=number)))
    return queries


def cmd_decode(args) -> int:
    settings = get_settings()
    expected = SymbolVocab.load(args.vocab) if args.vocab else None
    checkpoint = load_checkpoint(args.checkpoint, expected_vocab=expected)
    vocab = checkpoint.vocab
    if args.input == "-":
        queries = _read_queries(sys.stdin, args.separator)
    else:
        with open(args.input, encoding="utf-8") as f:
            queries = _read_queries(f, args.separator)
    inputs = [encode_query(language, lemma, tag, vocab) for _, language, lemma, tag in queries]
    results = decode_many(
        checkpoint.model(),
        inputs,
        vocab,
        beam_width=args.beam_width or settings.beam_width,
        workers=args.workers or settings.workers,
    )
    rows = ["\t".join([*columns, result.form]) + "\n" for (columns, _, _, _), result in zip(queries, results)]
    truncated = sum(1 for r in results if r.truncated)
    if truncated:
        logger.warning(f"{truncated} of {len(results)} predictions hit the length limit without EOW")
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as f:
            f.writelines(rows)
    else:
        sys.stdout.writelines(rows)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    settings = get_settings()
    split = read_split_manifest(args.split)
    checkpoint = load_checkpoint(args.checkpoint)
    predictions = predict(
        checkpoint, split.test, args.beam_width or settings.beam_width, args.workers or settings.workers
    )
    report = evaluate(predictions, [s.form for s in split.test], tags=[s.tag for s in split.test])
    for line in report_lines(report):
        print(line)
    if args.per_tag:
        write_frame(report.per_tag, args.per_tag)
    return EXIT_OK


def cmd_exp(args) -> int:
    spec = _load_spec(args, EXPERIMENT_KINDS[args.family])
    result = run_experiment(spec)
    if spec.kind is ExperimentKind.SHOT:
        for shot in result:
            print(f"[{shot.source} -> {shot.target}]")
            print(format_aligned(shot.report.to_frame(), acc_decimals=2, ed_decimals=2))
    else:
        print(summary_table(result).to_string(index=False))
    print(f"Results in {spec.run_dir}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    config = ModelConfig(
        input_vocab_size=args.input_vocab,
        output_vocab_size=args.output_vocab,
        hidden_size=args.hidden_size,
        embedding_size=args.embedding_size,
        max_decode_length=args.max_length,
        init_scheme=INIT_UNIFORM,
        init_range=args.init_range,
    )
    model = build_model(config, args.seed)
    batch = toy_batch(config, args.batch, args.max_length, args.seed)
    report = grad_check(
        model.params,
        lambda tape, store: model.batch_loss(tape, batch),
        tolerance=args.tolerance,
        step=args.step,
        floor=args.floor,
    )
    print(report.summary())
    if not report.passed:
        logger.error(f"Gradient check failed on {len(report.failures())} parameters")
        return EXIT_NUMERICAL
    return EXIT_OK


COMMANDS = {
    "prepare": cmd_prepare,
    "train": cmd_train,
    "decode": cmd_decode,
    "evaluate": cmd_evaluate,
    "exp": cmd_exp,
    "gradcheck": cmd_gradcheck,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=(args.log_level or get_settings().log_level).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except ValidationError as e:
        print(f"invalid experiment spec:\n{e}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as e:
        logger.error(str(e))
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as e:
        logger.error(str(e))
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except TransflexError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
