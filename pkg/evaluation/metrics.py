"""
Transflex - Evaluation Metrics
==============================
Exact-match accuracy, Levenshtein edit distance and one-/zero-shot breakdowns.
Strings are compared verbatim over Unicode code points, with no normalization.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import pandas as pd
from rapidfuzz.distance import Levenshtein

from corpus.splits import ShotClass, ShotSample
from corpus.tags import MorphTag
from utils.errors import DataError

logger = logging.getLogger(__name__)

ACC_DECIMALS = 4
ED_DECIMALS = 2


def edit_distance(a: str, b: str) -> int:
    """Unit-cost insert/delete/substitute distance, no transpositions."""
    return int(Levenshtein.distance(a, b))


def _check_pairs(predictions: Sequence[str], golds: Sequence[str]) -> None:
    if len(predictions) != len(golds):
        raise DataError(f"{len(predictions)} predictions for {len(golds)} gold forms")
    if not golds:
        raise DataError("cannot score an empty evaluation set")


def accuracy(predictions: Sequence[str], golds: Sequence[str]) -> float:
    """Fraction of predictions exactly equal to their gold form."""
    _check_pairs(predictions, golds)
    return sum(p == g for p, g in zip(predictions, golds)) / len(golds)


def mean_edit_distance(predictions: Sequence[str], golds: Sequence[str]) -> float:
    _check_pairs(predictions, golds)
    return sum(edit_distance(p, g) for p, g in zip(predictions, golds)) / len(golds)


@dataclass
class ClassStats:
    """Counts and scores of one subset; scores are None when the subset is empty."""
    n: int
    accuracy: Optional[float]
    mean_edit_distance: Optional[float]

    @classmethod
    def of(cls, predictions: Sequence[str], golds: Sequence[str]) -> "ClassStats":
        if not golds:
            return cls(0, None, None)
        return cls(len(golds), accuracy(predictions, golds), mean_edit_distance(predictions, golds))

    def to_dict(self) -> Dict:
        return {"n": self.n, "acc": self.accuracy, "ed": self.mean_edit_distance}


@dataclass
class EvalReport:
    """Pooled scores with optional shot-class breakdown and per-tag table."""
    n: int
    accuracy: float
    mean_edit_distance: float
    breakdown: Optional[Dict[ShotClass, ClassStats]] = None
    per_tag: Optional[pd.DataFrame] = None

    def to_dict(self) -> Dict:
        data = {"n": self.n, "acc": self.accuracy, "ed": self.mean_edit_distance}
        for shot_class, stats in (self.breakdown or {}).items():
            prefix = shot_class.value
            data.update({f"{prefix}.{k}": v for k, v in stats.to_dict().items()})
        return data

    def to_frame(self) -> pd.DataFrame:
        """One row for the pooled figures and one per shot class."""
        rows = [{"subset": "all", "n": self.n, "acc": self.accuracy, "ed": self.mean_edit_distance}]
        for shot_class, stats in (self.breakdown or {}).items():
            rows.append({"subset": shot_class.value, **stats.to_dict()})
        return pd.DataFrame(rows, columns=["subset", "n", "acc", "ed"])


def _per_tag(predictions: Sequence[str], golds: Sequence[str], tags: Sequence[MorphTag]) -> pd.DataFrame:
    frame = pd.DataFrame(
        {
            "tag": [str(t) for t in tags],
            "correct": [p == g for p, g in zip(predictions, golds)],
            "ed": [edit_distance(p, g) for p, g in zip(predictions, golds)],
        }
    )
    table = frame.groupby("tag", sort=True).agg(n=("correct", "size"), acc=("correct", "mean"), ed=("ed", "mean"))
    return table.reset_index()


def evaluate(
    predictions: Sequence[str],
    golds: Sequence[str],
    tags: Optional[Sequence[MorphTag]] = None,
) -> EvalReport:
    """Score predictions against golds; with ``tags`` also build the per-tag table."""
    stats = ClassStats.of(predictions, golds)
    if stats.n == 0:
        raise DataError("cannot score an empty evaluation set")
    per_tag = None
    if tags is not None:
        if len(tags) != len(golds):
            raise DataError(f"{len(tags)} tags for {len(golds)} gold forms")
        per_tag = _per_tag(predictions, golds, tags)
    return EvalReport(stats.n, stats.accuracy, stats.mean_edit_distance, per_tag=per_tag)


def shot_report(samples: Sequence[ShotSample], predictions: Sequence[str]) -> EvalReport:
    """
    Pooled and per-shot-class scores. An empty class is kept in the breakdown
    with n = 0 and no scores.
    """
    if len(samples) != len(predictions):
        raise DataError(f"{len(predictions)} predictions for {len(samples)} evaluation samples")
    for i, item in enumerate(samples):
        if not isinstance(item, ShotSample) or not isinstance(item.shot_class, ShotClass):
            raise DataError(f"evaluation sample {i} carries no shot class")

    golds = [item.sample.form for item in samples]
    report = evaluate(predictions, golds, tags=[item.sample.tag for item in samples])
    report.breakdown = {}
    for shot_class in ShotClass:
        picked = [i for i, item in enumerate(samples) if item.shot_class is shot_class]
        report.breakdown[shot_class] = ClassStats.of([predictions[i] for i in picked], [golds[i] for i in picked])
    logger.info(
        "Shot report: "
        + ", ".join(f"{c.value} n={s.n} acc={_fmt(s.accuracy, ACC_DECIMALS)}" for c, s in report.breakdown.items())
    )
    return report


def _fmt(value: Optional[float], decimals: int) -> str:
    return "-" if value is None else f"{value:.{decimals}f}"


def format_tsv(frame: pd.DataFrame, acc_decimals: int = ACC_DECIMALS, ed_decimals: int = ED_DECIMALS) -> str:
    """Render a frame with ``acc``/``ed`` columns as TSV at fixed precision."""
    out = _rounded(frame, acc_decimals, ed_decimals)
    return out.to_csv(sep="\t", index=False, lineterminator="\n")


def format_aligned(frame: pd.DataFrame, acc_decimals: int = ACC_DECIMALS, ed_decimals: int = ED_DECIMALS) -> str:
    """Render a frame as a whitespace-aligned text table."""
    out = _rounded(frame, acc_decimals, ed_decimals)
    return out.to_string(index=False) + "\n"


def _rounded(frame: pd.DataFrame, acc_decimals: int, ed_decimals: int) -> pd.DataFrame:
    out = frame.copy()
    for column in out.columns:
        name = str(column)
        if name == "acc" or name.endswith(".acc") or name.endswith("_acc"):
            out[column] = out[column].map(lambda v: _fmt(None if pd.isna(v) else float(v), acc_decimals))
        elif name == "ed" or name.endswith(".ed") or name.endswith("_ed"):
            out[column] = out[column].map(lambda v: _fmt(None if pd.isna(v) else float(v), ed_decimals))
    return out


def report_lines(report: EvalReport) -> List[str]:
    """Human-readable summary of a report."""
    lines = [f"n={report.n} acc={report.accuracy:.{ACC_DECIMALS}f} ed={report.mean_edit_distance:.{ED_DECIMALS}f}"]
    for shot_class, stats in (report.breakdown or {}).items():
        lines.append(
            f"  {shot_class.value}: n={stats.n} acc={_fmt(stats.accuracy, ACC_DECIMALS)} "
            f"ed={_fmt(stats.mean_edit_distance, ED_DECIMALS)}"
        )
    return lines
