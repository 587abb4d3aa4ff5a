"""
Transflex - Evaluation Module
=============================
Accuracy, edit distance and shot-class reports.
"""

from .metrics import (
    edit_distance,
    accuracy,
    mean_edit_distance,
    ClassStats,
    EvalReport,
    evaluate,
    shot_report,
    format_tsv,
    format_aligned,
    report_lines,
)

__all__ = [
    "edit_distance",
    "accuracy",
    "mean_edit_distance",
    "ClassStats",
    "EvalReport",
    "evaluate",
    "shot_report",
    "format_tsv",
    "format_aligned",
    "report_lines",
]
