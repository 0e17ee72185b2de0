"""Success-rate / trial-count tables and scatter files across runs."""
import logging
from pathlib import Path
from typing import Dict, List, Sequence

import pandas as pd

from experiment_history import (
    FLOAT_FORMAT,
    SCATTER_COLUMNS,
    SUMMARY_COLUMNS,
    ExperimentSummary,
    load_scatter_table,
    load_summary_table,
)

logger = logging.getLogger(__name__)

REPORT_FILE = "report.txt"
REPORT_SCATTER_FILE = "report_scatter.csv"


def _fmt(value, pattern: str) -> str:
    return "-" if value is None or pd.isna(value) else pattern.format(value)


def format_table(table: pd.DataFrame) -> str:
    """Fixed-width text table: one row per (shape, estimator)."""
    header = ["Shape", "Estimator", "Episodes", "Success", "Mean trials", "Max trials", "Failures"]
    rows = [
        [
            str(row["shape"]),
            str(row["estimator"]),
            str(int(row["episodes"])),
            _fmt(row["success_rate"] * 100 if pd.notna(row["success_rate"]) else None, "{:.1f}%"),
            _fmt(row["mean_trials"], "{:.2f}"),
            _fmt(row["max_trials"], "{:.0f}"),
            str(int(row["failures"])),
        ]
        for _, row in table.iterrows()
    ]
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    lines.extend("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows)
    return "\n".join(lines) + "\n"


def _write(table: pd.DataFrame, scatter: pd.DataFrame, out_path: str) -> Dict[str, str]:
    out_dir = Path(out_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / REPORT_FILE
    report_path.write_text(format_table(table))
    scatter_path = out_dir / REPORT_SCATTER_FILE
    scatter.to_csv(scatter_path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"Report with {len(table)} row(s) written to {report_path}")
    return {"report": str(report_path), "scatter": str(scatter_path)}


def report(summaries: Sequence[ExperimentSummary], out_path: str) -> Dict[str, str]:
    """Text table plus scatter CSV for in-memory summaries."""
    if not summaries:
        raise ValueError("report needs at least one summary")
    table = pd.DataFrame([s.get_statistics() for s in summaries], columns=SUMMARY_COLUMNS)
    scatter = pd.DataFrame([row for s in summaries for row in s.scatter_rows()], columns=SCATTER_COLUMNS)
    return _write(table, scatter, out_path)


def merge_runs(run_dirs: Sequence[str]) -> pd.DataFrame:
    """Summary rows of several runs; colliding (shape, estimator) keys get the run id appended."""
    if not run_dirs:
        raise ValueError("report needs at least one run directory")
    frames: List[pd.DataFrame] = []
    for run_dir in run_dirs:
        table = load_summary_table(run_dir)
        table["run"] = Path(run_dir).name
        frames.append(table)
    merged = pd.concat(frames, ignore_index=True)

    duplicated = merged.duplicated(subset=["shape", "estimator"], keep=False)
    if duplicated.any():
        merged.loc[duplicated, "shape"] = merged.loc[duplicated, "shape"] + " [" + merged.loc[duplicated, "run"] + "]"
        logger.warning(f"{int(duplicated.sum())} rows share a (shape, estimator) key; suffixed with run id")
    return merged


def report_runs(run_dirs: Sequence[str], out_path: str) -> Dict[str, str]:
    """Combined table and scatter CSV over run directories."""
    table = merge_runs(run_dirs)
    scatter = pd.concat(
        [load_scatter_table(d).assign(run=Path(d).name) for d in run_dirs], ignore_index=True
    )
    return _write(table, scatter, out_path)
