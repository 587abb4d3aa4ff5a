"""
Transflex - Experiments Module
==============================
Experiment specs, the runners for each experiment family, and result reporting.
"""

from .spec import ExperimentKind, ExperimentSpec, load_spec, read_spec_file
from .runner import (
    ResultRow,
    ShotResult,
    CorpusPool,
    conditions,
    build_split,
    run_cell,
    cell_name,
    seeds_for,
    train_config_for,
    predict,
    encipher_split,
    run_transfer,
    run_learning_curve,
    run_shot,
    run_cipher,
    run_experiment,
    BASELINE,
)
from .reporting import (
    RESULT_COLUMNS,
    rows_frame,
    summary_table,
    write_results,
    write_summary,
    write_manifest,
    write_curve_csv,
    create_learning_curve_chart,
    write_learning_curve_chart,
)

__all__ = [
    "ExperimentKind",
    "ExperimentSpec",
    "load_spec",
    "read_spec_file",
    "ResultRow",
    "ShotResult",
    "CorpusPool",
    "conditions",
    "build_split",
    "run_cell",
    "cell_name",
    "seeds_for",
    "train_config_for",
    "predict",
    "encipher_split",
    "run_transfer",
    "run_learning_curve",
    "run_shot",
    "run_cipher",
    "run_experiment",
    "BASELINE",
    "RESULT_COLUMNS",
    "rows_frame",
    "summary_table",
    "write_results",
    "write_summary",
    "write_manifest",
    "write_curve_csv",
    "create_learning_curve_chart",
    "write_learning_curve_chart",
]
