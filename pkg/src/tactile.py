"""Synthetic two-pad marker-field sequences and the incipient-slip monitor.

Each sequence holds 8 difference frames (frame 1 is the zero reference) for
two opposing gel pads. Shear is the in-gel-plane (x, z) marker displacement,
pressure is the signed change of normal indentation, both in mm.
"""
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from contact import Twist, TwistDecomposition

logger = logging.getLogger(__name__)

FRAME_COUNT = 8
SENSOR_NAMES = ("A", "B")

# half of the frame-8 peak shear of a rectangle blocked at dx = 10 mm
# (default pads and descent), so every one-sided contact trips it
DEFAULT_TAU_SLIP = 3.0


@dataclass(frozen=True)
class SensorLayout:
    """Marker grid on one gel pad.

    patch_height is the height of the patch centre above the object's bottom
    edge; pressure_gain converts pivot indentation into pressure_delta.
    """
    grid_rows: int = 9
    grid_cols: int = 9
    marker_spacing: float = 1.5
    patch_center: Tuple[float, float] = (0.0, 0.0)
    gel_normal: int = 1
    patch_height: float = 15.0
    pressure_gain: float = 0.05

    def __post_init__(self):
        if self.grid_rows < 1 or self.grid_cols < 1:
            raise ValueError("marker grid must have at least one row and column")
        if self.marker_spacing <= 0:
            raise ValueError(f"marker_spacing must be > 0, got {self.marker_spacing}")
        if self.gel_normal not in (1, -1):
            raise ValueError(f"gel_normal must be +1 or -1, got {self.gel_normal}")

    def mirrored(self) -> "SensorLayout":
        """The opposing pad: same grid seen through the other side of the object."""
        return SensorLayout(
            grid_rows=self.grid_rows,
            grid_cols=self.grid_cols,
            marker_spacing=self.marker_spacing,
            patch_center=self.patch_center,
            gel_normal=-self.gel_normal,
            patch_height=self.patch_height,
            pressure_gain=self.pressure_gain,
        )

    def marker_positions(self) -> Tuple[np.ndarray, np.ndarray]:
        """(px, pz) arrays of shape (rows, cols); x is mirrored on the -y pad."""
        cols = (np.arange(self.grid_cols) - (self.grid_cols - 1) / 2) * self.marker_spacing
        rows = (np.arange(self.grid_rows) - (self.grid_rows - 1) / 2) * self.marker_spacing
        pz, px = np.meshgrid(rows, cols, indexing="ij")
        px = self.gel_normal * (px + self.patch_center[0])
        pz = pz + self.patch_center[1]
        return px, pz


@dataclass(frozen=True)
class MarkerField:
    shear: np.ndarray
    pressure_delta: np.ndarray


@dataclass(frozen=True)
class TactileSequence:
    """Difference frames for both pads.

    shear: (frames, 2, rows, cols, 2) with last axis (x, z);
    pressure: (frames, 2, rows, cols).
    """
    shear: np.ndarray
    pressure: np.ndarray

    def __post_init__(self):
        if self.shear.shape[0] != FRAME_COUNT or self.pressure.shape[0] != FRAME_COUNT:
            raise ValueError(f"a tactile sequence holds exactly {FRAME_COUNT} frames")
        if self.shear.shape[:4] != self.pressure.shape or self.shear.shape[1] != 2:
            raise ValueError("shear and pressure arrays do not describe the same two pads")
        if np.any(self.shear[0]) or np.any(self.pressure[0]):
            raise ValueError("frame 1 of a difference sequence must be zero")

    @property
    def frames(self) -> Tuple[Tuple[MarkerField, MarkerField], ...]:
        return tuple(
            tuple(MarkerField(self.shear[k, s], self.pressure[k, s]) for s in range(2))
            for k in range(FRAME_COUNT)
        )

    def prefix(self, count: int) -> np.ndarray:
        """Shear of the first `count` frames."""
        return self.shear[:count]

    def scaled(self, factor: float) -> "TactileSequence":
        return TactileSequence(self.shear * factor, self.pressure * factor)

    @classmethod
    def zeros(cls, layout: Optional[SensorLayout] = None) -> "TactileSequence":
        layout = layout or SensorLayout()
        grid = (FRAME_COUNT, 2, layout.grid_rows, layout.grid_cols)
        return cls(np.zeros(grid + (2,)), np.zeros(grid))


def _pad_increment(
    decomp: TwistDecomposition, twist: Twist, layout: SensorLayout
) -> Tuple[np.ndarray, np.ndarray]:
    """Per-frame shear and pressure step on one pad."""
    px, pz = layout.marker_positions()
    alpha = math.radians(decomp.in_plane)
    s = decomp.shear_sign
    lever = twist.lever_arm
    height = layout.patch_height

    # small-angle rotation about y through the pivot (-s*lever, -height)
    shear_x = s * alpha * (pz + height)
    shear_z = -s * alpha * px - alpha * lever
    shear = np.stack([shear_x, shear_z], axis=-1)

    # indentation grows linearly toward the top row of the patch
    span = np.ptp(pz)
    taper = (pz - pz.min()) / span if span > 0 else np.ones_like(pz)
    amplitude = decomp.pressure_sign * abs(math.radians(decomp.out_of_plane)) * lever * layout.pressure_gain
    pressure = layout.gel_normal * amplitude * taper
    return shear, pressure


def render_sequence(
    decomp: TwistDecomposition,
    twist: Twist,
    layout: Optional[SensorLayout] = None,
    noise_sigma: float = 0.0,
    rng_seed: Optional[int] = None,
) -> TactileSequence:
    """Render the 8 post-contact difference frames for both pads."""
    if noise_sigma < 0:
        raise ValueError(f"noise_sigma must be >= 0, got {noise_sigma}")
    layout = layout or SensorLayout()

    steps = np.arange(FRAME_COUNT, dtype=float)
    shears, pressures = [], []
    for pad in (layout, layout.mirrored()):
        shear_step, pressure_step = _pad_increment(decomp, twist, pad)
        shears.append(steps[:, None, None, None] * shear_step[None])
        pressures.append(steps[:, None, None] * pressure_step[None])

    shear = np.stack(shears, axis=1)
    pressure = np.stack(pressures, axis=1)

    if noise_sigma > 0:
        rng = np.random.default_rng(rng_seed)
        shear[1:] += rng.normal(0.0, noise_sigma, size=shear[1:].shape)
        pressure[1:] += rng.normal(0.0, noise_sigma, size=pressure[1:].shape)

    return TactileSequence(shear=shear, pressure=pressure)


def slip_metric(seq_prefix) -> float:
    """Largest marker shear magnitude in the latest frame of the prefix."""
    shear = seq_prefix.shear if isinstance(seq_prefix, TactileSequence) else np.asarray(seq_prefix)
    if len(shear) < 1:
        raise ValueError("slip_metric needs at least one frame")
    return float(np.linalg.norm(shear[-1], axis=-1).max())


def incipient_slip(seq_prefix, tau_slip: float = DEFAULT_TAU_SLIP) -> bool:
    if tau_slip <= 0:
        raise ValueError(f"tau_slip must be > 0, got {tau_slip}")
    return slip_metric(seq_prefix) >= tau_slip


def first_slip_frame(seq: TactileSequence, tau_slip: float = DEFAULT_TAU_SLIP) -> Optional[int]:
    """1-based frame at which the slip monitor halts the descent, if ever."""
    for count in range(1, FRAME_COUNT + 1):
        if incipient_slip(seq.prefix(count), tau_slip):
            return count
    return None


def marker_table(seq: TactileSequence) -> pd.DataFrame:
    """Long-form marker rows (frame is 1-based) in array order."""
    rows, cols = seq.pressure.shape[2:]
    frame, sensor, row, col = np.meshgrid(
        np.arange(1, FRAME_COUNT + 1), np.arange(2), np.arange(rows), np.arange(cols), indexing="ij"
    )
    return pd.DataFrame({
        "frame": frame.ravel(),
        "sensor": np.array(SENSOR_NAMES)[sensor.ravel()],
        "row": row.ravel(),
        "col": col.ravel(),
        "shear_x": seq.shear[..., 0].ravel(),
        "shear_z": seq.shear[..., 1].ravel(),
        "pressure": seq.pressure.ravel(),
    })


def sequences_from_table(table: pd.DataFrame, count: int, grid: Tuple[int, int]) -> List[TactileSequence]:
    """Rebuild `count` sequences from marker rows keyed by a 0-based `sample` column.

    Row order does not matter, but every (sample, frame, sensor, row, col)
    must appear exactly once.
    """
    rows, cols = grid
    table = table.reset_index(drop=True)
    expected = count * FRAME_COUNT * 2 * rows * cols
    if len(table) != expected:
        raise ValueError(f"expected {expected} marker rows for {count} samples, got {len(table)}")

    keys = pd.DataFrame({
        "sample": table["sample"],
        "frame": table["frame"] - 1,
        "pad": table["sensor"].map({name: i for i, name in enumerate(SENSOR_NAMES)}),
        "row": table["row"],
        "col": table["col"],
    })
    if keys["pad"].isna().any():
        raise ValueError(f"marker rows name a sensor outside {SENSOR_NAMES}")
    bounds = {"sample": count, "frame": FRAME_COUNT, "pad": 2, "row": rows, "col": cols}
    for key, bound in bounds.items():
        if ((keys[key] < 0) | (keys[key] >= bound)).any():
            raise ValueError(f"marker rows have '{key}' outside [0, {bound})")
    if keys.duplicated().any():
        raise ValueError("marker rows repeat a sample, frame, sensor and marker")

    order = keys.sort_values(list(bounds), kind="stable").index
    shape = (count, FRAME_COUNT, 2, rows, cols)
    ordered = table.iloc[order]
    shear = np.stack([
        ordered["shear_x"].to_numpy(dtype=float).reshape(shape),
        ordered["shear_z"].to_numpy(dtype=float).reshape(shape),
    ], axis=-1)
    pressure = ordered["pressure"].to_numpy(dtype=float).reshape(shape)
    return [TactileSequence(shear[i], pressure[i]) for i in range(count)]


def dump_sequence(seq: TactileSequence, out_dir: str, prefix: str = "contact") -> Path:
    """Write one P5 pressure image per frame per pad plus a marker CSV."""
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)

    peak = float(np.abs(seq.pressure).max())
    scale = 127.0 / peak if peak > 0 else 0.0
    rows, cols = seq.pressure.shape[2:]
    for k in range(FRAME_COUNT):
        for s, name in enumerate(SENSOR_NAMES):
            pixels = np.clip(np.rint(128 + seq.pressure[k, s] * scale), 0, 255).astype(np.uint8)
            with open(out_path / f"{prefix}_f{k + 1}_{name}.pgm", "wb") as f:
                f.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
                f.write(pixels.tobytes())

    csv_path = out_path / f"{prefix}_markers.csv"
    marker_table(seq).to_csv(csv_path, index=False, float_format="%.9g")
    logger.info(f"Tactile dump written to {out_path} ({FRAME_COUNT} frames x 2 pads)")
    return csv_path
