"""Self-supervised dataset generation: sample errors, keep blocked contacts, label them."""
import json
import logging
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from episode_runner import EpisodeRunner, ExperimentConfig, sample_error
from estimation import CLASS_COUNT, DirectionClass, label_contact
from geometry import ErrorState
from linear_estimator import FEATURE_DIM, FRAME_STATS, PIVOT_STATS, FitError, extract_features
from tactile import TactileSequence, marker_table, sequences_from_table

logger = logging.getLogger(__name__)

DATASET_FORMAT = "tactile-pack-dataset"
DATASET_VERSION = 2
PURE_ROTATION_CLASSES = (DirectionClass.MINUS_THETA, DirectionClass.PLUS_THETA)
FEATURE_COLUMNS = [f"f{i:03d}" for i in range(FEATURE_DIM)]
MARKER_COLUMNS = ["sample", "frame", "sensor", "row", "col", "shear_x", "shear_z", "pressure"]


class EmptyDatasetError(FitError):
    """Raised when sampling produced no blocked contact at all."""


@dataclass(frozen=True)
class DatasetSample:
    features: np.ndarray
    class_label: DirectionClass
    error_label: ErrorState
    shape_id: str
    dominant: bool = False
    sequence: Optional[TactileSequence] = None

    def as_training_row(self) -> Tuple[np.ndarray, DirectionClass, ErrorState]:
        return self.features, self.class_label, self.error_label


def _shape_rng(cfg: ExperimentConfig) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([cfg.seed, *cfg.shape.name.encode()]))


def collect_dataset(
    cfg: ExperimentConfig,
    samples_per_shape: int,
    max_attempts_factor: int = 20,
    double_pure_rotation: bool = True,
) -> List[DatasetSample]:
    """Blocked contacts with their tactile features and labels for one shape.

    Class 7 and 8 samples are re-observed once more with fresh sensor noise.
    """
    if samples_per_shape < 1:
        raise ValueError(f"samples_per_shape must be >= 1, got {samples_per_shape}")

    # labels come from geometry, the configured estimator plays no part
    runner = EpisodeRunner(replace(cfg, estimator="oracle", weights_path=None))
    rng = _shape_rng(cfg)
    name = cfg.shape.name

    samples: List[DatasetSample] = []
    errors: List[ErrorState] = []
    max_attempts = samples_per_shape * max_attempts_factor
    attempts = silent = 0
    while len(samples) < samples_per_shape and attempts < max_attempts:
        attempts += 1
        error = sample_error(cfg, rng)
        obs = runner.observe(error, rng)
        if not obs.event.blocked:
            continue
        if obs.slip_frame is None:
            silent += 1
        label, dominant = label_contact(error, cfg.thresholds, blocked=True)
        samples.append(DatasetSample(extract_features(obs.sequence), label, error, name, dominant, obs.sequence))
        errors.append(error)

    if not samples:
        raise EmptyDatasetError(f"{name} never blocked in {attempts} attempts")
    if len(samples) < samples_per_shape:
        logger.warning(f"{name}: only {len(samples)} blocked contacts in {attempts} attempts")
    if silent:
        logger.warning(f"{name}: {silent} blocked contacts never reached the slip threshold")
    dominant_count = sum(s.dominant for s in samples)
    if dominant_count:
        logger.warning(f"{name}: {dominant_count} sub-threshold contacts labeled by dominant component")

    if double_pure_rotation:
        extra = []
        for sample, error in zip(list(samples), errors):
            if sample.class_label in PURE_ROTATION_CLASSES:
                obs = runner.observe(error, rng)
                extra.append(replace(sample, features=extract_features(obs.sequence), sequence=obs.sequence))
        samples.extend(extra)

    logger.info(f"{name}: {len(samples)} samples from {attempts} attempts, counts {format_counts(class_counts(samples))}")
    return samples


def class_counts(samples: Sequence[DatasetSample]) -> Dict[str, int]:
    """Per-class sample counts, every class present (zeros included)."""
    counts = Counter(s.class_label for s in samples)
    return {DirectionClass(i).label: counts.get(DirectionClass(i), 0) for i in range(1, CLASS_COUNT + 1)}


def format_counts(counts: Dict[str, int]) -> str:
    return " ".join(f"{label}:{n}" for label, n in counts.items())


def split_dataset(
    samples: Sequence[DatasetSample], holdout_fraction: float = 0.2, seed: int = 0
) -> Tuple[List[DatasetSample], List[DatasetSample]]:
    """Deterministic shuffled (train, held-out) split."""
    if not 0 < holdout_fraction < 1:
        raise ValueError(f"holdout_fraction must be in (0, 1), got {holdout_fraction}")
    order = np.random.default_rng(seed).permutation(len(samples))
    n_test = int(round(len(samples) * holdout_fraction))
    test = [samples[i] for i in order[:n_test]]
    train = [samples[i] for i in order[n_test:]]
    return train, test


def markers_path(path: Path) -> Path:
    """Companion marker-row file of a dataset file."""
    return path.with_name(f"{path.stem}_markers.csv")


def write_dataset(samples: Sequence[DatasetSample], path: str, seed: int = 0, markers: bool = True) -> Path:
    """One '#' JSON header line, then a CSV of labels and feature vectors.

    With `markers`, every sample's marker fields also go to a companion
    `<stem>_markers.csv`, one row per sample, frame, pad and marker.
    """
    out_path = Path(path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    if markers and any(s.sequence is None for s in samples):
        raise ValueError("cannot write marker rows: some samples carry no tactile sequence")

    grid = list(samples[0].sequence.pressure.shape[2:]) if markers and samples else None
    header = {
        "format": DATASET_FORMAT,
        "version": DATASET_VERSION,
        "seed": seed,
        "samples": len(samples),
        "feature_dim": FEATURE_DIM,
        "frame_stats": list(FRAME_STATS),
        "pivot_stats": list(PIVOT_STATS),
        "shapes": sorted({s.shape_id for s in samples}),
        "counts": class_counts(samples),
        "markers": markers_path(out_path).name if markers else None,
        "grid": grid,
    }
    table = pd.DataFrame({
        "shape": [s.shape_id for s in samples],
        "class_label": [s.class_label.label for s in samples],
        "dx": [s.error_label.dx for s in samples],
        "dtheta": [s.error_label.dtheta for s in samples],
        "dominant": [int(s.dominant) for s in samples],
    })
    features = pd.DataFrame(
        np.array([s.features for s in samples]).reshape(len(samples), FEATURE_DIM), columns=FEATURE_COLUMNS
    )
    table = pd.concat([table, features], axis=1)

    with open(out_path, "w") as f:
        f.write("# " + json.dumps(header, sort_keys=True) + "\n")
        table.to_csv(f, index=False, float_format="%.12g")

    if markers:
        rows = []
        for i, sample in enumerate(samples):
            frame = marker_table(sample.sequence)
            frame.insert(0, "sample", i)
            rows.append(frame)
        marker_rows = pd.concat(rows, ignore_index=True) if rows else pd.DataFrame(columns=MARKER_COLUMNS)
        marker_rows.to_csv(markers_path(out_path), index=False, float_format="%.12g")
    logger.info(f"Dataset written to {out_path}: {len(samples)} samples{' with marker rows' if markers else ''}")
    return out_path


def read_dataset(path: str) -> Tuple[Dict, List[DatasetSample]]:
    """Header dict and samples from a dataset file.

    When the file has marker rows, sequences are rebuilt from them and the
    features recomputed, so a changed feature layout needs no re-collection.
    """
    in_path = Path(path)
    if not in_path.exists():
        raise FileNotFoundError(f"Dataset file not found: {in_path}")

    with open(in_path, "r") as f:
        first = f.readline()
    try:
        header = json.loads(first.lstrip("#").strip())
    except json.JSONDecodeError:
        raise ValueError(f"{in_path}: missing dataset header") from None
    if not isinstance(header, dict):
        raise ValueError(f"{in_path}: missing dataset header")
    if header.get("format") != DATASET_FORMAT or header.get("version") != DATASET_VERSION:
        raise ValueError(f"{in_path}: unsupported dataset format {header.get('format')} v{header.get('version')}")

    table = pd.read_csv(in_path, skiprows=1, dtype={"shape": str, "class_label": str})
    count = len(table)
    if header.get("markers") and count:
        marker_file = in_path.with_name(header["markers"])
        if not marker_file.exists():
            raise FileNotFoundError(f"Marker rows not found: {marker_file}")
        marker_rows = pd.read_csv(marker_file, dtype={"sensor": str})
        try:
            sequences = sequences_from_table(marker_rows, count, tuple(header["grid"]))
        except (KeyError, TypeError, ValueError) as e:
            raise ValueError(f"{marker_file}: {e}") from None
        features = np.array([extract_features(seq) for seq in sequences]).reshape(count, FEATURE_DIM)
    else:
        if header.get("feature_dim") != FEATURE_DIM:
            raise ValueError(f"{in_path}: feature_dim {header.get('feature_dim')} != {FEATURE_DIM}")
        sequences = [None] * count
        features = table[FEATURE_COLUMNS].to_numpy(dtype=float)

    samples = [
        DatasetSample(
            features=features[i],
            class_label=DirectionClass.from_label(row.class_label),
            error_label=ErrorState(float(row.dx), float(row.dtheta)),
            shape_id=row.shape,
            dominant=bool(row.dominant),
            sequence=sequences[i],
        )
        for i, row in enumerate(table[["shape", "class_label", "dx", "dtheta", "dominant"]].itertuples(index=False))
    ]
    logger.info(f"Loaded {len(samples)} samples from {in_path}")
    return header, samples
