"""Run manifest written next to every output set."""
import json
import logging
import os
import time
from pathlib import Path
from typing import Any, Dict, Optional

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.json"
TOOL_VERSION = "0.1.0"


class RunManifest:
    """Records what produced a set of outputs: config, seed, version, paths, duration."""

    def __init__(self, command: str, out_dir: str, config: Dict[str, Any], seed: int, schema_version: int = 1):
        self.command = command
        self.out_dir = Path(out_dir)
        self.config = config
        self.seed = seed
        self.schema_version = schema_version
        self.outputs: Dict[str, str] = {}
        self.started_at = time.time()
        self.finished_at: Optional[float] = None

    def add_output(self, name: str, path) -> None:
        self.outputs[name] = str(path)

    def to_dict(self) -> Dict:
        finished = self.finished_at if self.finished_at is not None else time.time()
        return {
            "command": self.command,
            "tool_version": TOOL_VERSION,
            "schema_version": self.schema_version,
            "seed": self.seed,
            "config": self.config,
            "outputs": self.outputs,
            "started_at": self.started_at,
            "finished_at": finished,
            "duration_seconds": round(finished - self.started_at, 3),
        }

    def save(self) -> Path:
        """Write the manifest atomically (temp file + rename)."""
        self.finished_at = time.time()
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / MANIFEST_FILE
        tmp_path = path.with_suffix(".json.tmp")
        with open(tmp_path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)
        os.replace(tmp_path, path)
        logger.debug(f"Manifest saved to {path}")
        return path


def load_manifest(run_dir: str) -> Optional[Dict]:
    """Manifest of a run directory, or None when the run has none."""
    path = Path(run_dir) / MANIFEST_FILE
    if not path.exists():
        return None
    with open(path, "r") as f:
        return json.load(f)
