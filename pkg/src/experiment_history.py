"""Experiment results: per-shape summaries and their on-disk files."""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import pandas as pd

from episode_runner import EpisodeRecord
from run_manifest import load_manifest

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
EPISODES_FILE = "episodes.jsonl"
SUMMARY_FILE = "summary.csv"
SCATTER_FILE = "scatter.csv"
SUMMARY_COLUMNS = ["shape", "estimator", "episodes", "success_rate", "mean_trials", "max_trials", "min_trials", "failures"]
SCATTER_COLUMNS = ["shape", "estimator", "dx0", "dtheta0", "trials", "success"]
FLOAT_FORMAT = "%.6f"


class SchemaError(ValueError):
    """Raised when result files of different schema versions are combined."""


@dataclass
class ExperimentSummary:
    """Episodes of one (shape, estimator) run; failures count as max_trials + 1."""
    shape: str
    estimator: str
    records: List[EpisodeRecord] = field(default_factory=list)

    def add_episode(self, record: EpisodeRecord) -> None:
        self.records.append(record)

    @property
    def episodes(self) -> int:
        return len(self.records)

    @property
    def success_rate(self) -> Optional[float]:
        if not self.records:
            return None
        return sum(r.success for r in self.records) / len(self.records)

    @property
    def mean_trials(self) -> Optional[float]:
        if not self.records:
            return None
        return sum(r.trial_count for r in self.records) / len(self.records)

    @property
    def max_trials_observed(self) -> Optional[int]:
        return max((r.trial_count for r in self.records), default=None)

    def get_statistics(self) -> Dict:
        """Calculate success and trial-count statistics.

        Returns:
            Dict keyed by SUMMARY_COLUMNS; rate and trial fields are None when
            no episode ran.
        """
        return {
            "shape": self.shape,
            "estimator": self.estimator,
            "episodes": self.episodes,
            "success_rate": self.success_rate,
            "mean_trials": self.mean_trials,
            "max_trials": self.max_trials_observed,
            "min_trials": min((r.trial_count for r in self.records), default=None),
            "failures": sum(not r.success for r in self.records),
        }

    def scatter_rows(self) -> List[Dict]:
        return [
            {
                "shape": self.shape,
                "estimator": self.estimator,
                "dx0": r.initial_error.dx,
                "dtheta0": r.initial_error.dtheta,
                "trials": r.trial_count,
                "success": r.success,
            }
            for r in self.records
        ]

    def trial_rows(self) -> List[Dict]:
        rows = []
        for r in self.records:
            for row in r.to_rows():
                rows.append({"shape": self.shape, "estimator": self.estimator, **row})
        return rows


def _to_csv(rows: List[Dict], columns: List[str], path: Path) -> None:
    pd.DataFrame(rows, columns=columns).to_csv(path, index=False, float_format=FLOAT_FORMAT)


def write_results(summaries: Sequence[ExperimentSummary], out_dir: str) -> Dict[str, str]:
    """Write episode JSONL, summary CSV and scatter CSV; returns name -> path."""
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)

    episodes_path = out_path / EPISODES_FILE
    with open(episodes_path, "w") as f:
        for summary in summaries:
            for row in summary.trial_rows():
                f.write(json.dumps(row) + "\n")

    summary_path = out_path / SUMMARY_FILE
    _to_csv([s.get_statistics() for s in summaries], SUMMARY_COLUMNS, summary_path)

    scatter_path = out_path / SCATTER_FILE
    _to_csv([row for s in summaries for row in s.scatter_rows()], SCATTER_COLUMNS, scatter_path)

    logger.info(f"Results for {len(summaries)} run(s) written to {out_path}")
    return {"episodes": str(episodes_path), "summary": str(summary_path), "scatter": str(scatter_path)}


def load_summary_table(run_dir: str) -> pd.DataFrame:
    """Summary rows of one run directory, checked against SCHEMA_VERSION."""
    run_path = Path(run_dir)
    summary_path = run_path / SUMMARY_FILE
    if not summary_path.exists():
        raise FileNotFoundError(f"No {SUMMARY_FILE} in {run_path}")

    manifest = load_manifest(run_dir)
    if manifest is not None:
        version = manifest.get("schema_version")
        if version != SCHEMA_VERSION:
            raise SchemaError(f"{run_path}: schema version {version}, expected {SCHEMA_VERSION}")

    table = pd.read_csv(summary_path, dtype={"shape": str, "estimator": str})
    missing = set(SUMMARY_COLUMNS) - set(table.columns)
    if missing:
        raise SchemaError(f"{summary_path}: missing columns {sorted(missing)}")
    return table


def load_scatter_table(run_dir: str) -> pd.DataFrame:
    scatter_path = Path(run_dir) / SCATTER_FILE
    if not scatter_path.exists():
        raise FileNotFoundError(f"No {SCATTER_FILE} in {run_dir}")
    return pd.read_csv(scatter_path, dtype={"shape": str, "estimator": str})
