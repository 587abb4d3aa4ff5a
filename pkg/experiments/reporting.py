"""
Transflex - Result Reporting
============================
Result tables (raw TSV and condensed summaries), run manifests, and the
learning-curve chart.
"""

import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import pandas as pd

from evaluation.metrics import format_aligned, format_tsv

logger = logging.getLogger(__name__)

RESULT_COLUMNS = ["source", "ciph", "target", "n_s", "n_t", "seed", "acc", "ed", "checkpoint"]


def rows_frame(rows: Sequence) -> pd.DataFrame:
    """ResultRows as a DataFrame in row order (wall time excluded)."""
    return pd.DataFrame([row.to_dict() for row in rows], columns=RESULT_COLUMNS)


def write_results(rows: Sequence, path) -> Path:
    """Raw results TSV: accuracy to 4 decimals, edit distance to 2."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_tsv(rows_frame(rows)), encoding="utf-8")
    logger.info(f"Wrote {len(rows)} result rows to {path}")
    return path


def summary_table(rows: Sequence) -> pd.DataFrame:
    """
    Summary grid: one line per n_t, one column pair (acc, ED) per source
    condition in first-appearance order, values to 2 decimals.
    """
    frame = pd.DataFrame(
        [{"n_t": r.n_t, "label": r.label, "acc": r.accuracy, "ed": r.mean_edit_distance} for r in rows]
    )
    if frame.empty:
        return frame
    labels = list(dict.fromkeys(frame["label"]))
    acc = frame.pivot(index="n_t", columns="label", values="acc")[labels]
    ed = frame.pivot(index="n_t", columns="label", values="ed")[labels]
    table = pd.DataFrame(index=acc.index)
    for label in labels:
        table[f"{label} acc"] = acc[label].map(lambda v: "" if pd.isna(v) else f"{v:.2f}")
        table[f"{label} ED"] = ed[label].map(lambda v: "" if pd.isna(v) else f"{v:.2f}")
    return table.sort_index().reset_index()


def write_summary(
    rows: Sequence,
    path,
    title: str,
    notes: Iterable[str] = (),
    shot_frame: Optional[pd.DataFrame] = None,
) -> Path:
    """Human-readable summary: the result grid, optional shot table, then notes."""
    parts = [title, "=" * len(title), ""]
    if rows:
        parts.append(summary_table(rows).to_string(index=False))
        parts.append("")
        parts.extend(f"{r.label} n_t={r.n_t}: {r.wall_time:.1f}s" for r in rows)
        parts.append("")
    if shot_frame is not None and not shot_frame.empty:
        parts.append(format_aligned(shot_frame, acc_decimals=2, ed_decimals=2))
    parts.extend(notes)
    path = Path(path)
    path.write_text("\n".join(parts).rstrip("\n") + "\n", encoding="utf-8")
    return path


def write_frame(frame: pd.DataFrame, path) -> Path:
    path = Path(path)
    path.write_text(format_tsv(frame), encoding="utf-8")
    return path


def write_manifest(path, sections: Dict[str, Dict[str, object]]) -> Path:
    """``[section]`` headers followed by ``key = value`` lines."""
    lines: List[str] = []
    for section, entries in sections.items():
        lines.append(f"[{section}]")
        lines.extend(f"{key} = {value}" for key, value in entries.items())
        lines.append("")
    path = Path(path)
    path.write_text("\n".join(lines), encoding="utf-8")
    return path


def write_curve_csv(rows: Sequence, path) -> Path:
    """Plot-ready learning-curve data: one line per (source, n_t)."""
    frame = pd.DataFrame(
        [{"source": r.label, "n_t": r.n_t, "acc": r.accuracy, "ed": r.mean_edit_distance} for r in rows],
        columns=["source", "n_t", "acc", "ed"],
    )
    path = Path(path)
    frame.to_csv(path, index=False, lineterminator="\n", float_format="%.4f")
    return path


def create_learning_curve_chart(rows: Sequence, target: str):
    """Plotly line chart of accuracy against n_t, one trace per source condition."""
    import plotly.graph_objects as go

    if not rows:
        return None

    fig = go.Figure()
    for label in dict.fromkeys(r.label for r in rows):
        points = sorted((r.n_t, r.accuracy) for r in rows if r.label == label)
        fig.add_trace(go.Scatter(
            x=[n for n, _ in points],
            y=[a for _, a in points],
            mode='lines+markers',
            marker=dict(size=7),
            name='no transfer' if label == "0" else label,
        ))

    fig.update_layout(
        title=f'Learning curve for {target}',
        xaxis_title='Number of target training samples',
        yaxis_title='Accuracy',
        xaxis_type='log',
        yaxis_range=[0, 1],
        template='plotly_white',
        showlegend=True,
        legend=dict(orientation='h', yanchor='bottom', y=1.02),
    )
    return fig


def write_learning_curve_chart(rows: Sequence, target: str, path) -> Optional[Path]:
    fig = create_learning_curve_chart(rows, target)
    if fig is None:
        return None
    path = Path(path)
    fig.write_html(str(path), include_plotlyjs="cdn")
    logger.info(f"Wrote learning-curve chart to {path}")
    return path
