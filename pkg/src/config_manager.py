"""Configuration manager for experiments (flat `section.key = value` files)."""
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Set

from controller import ControllerParams
from geometry import SHAPE_CATALOG, TRAINING_SHAPES

logger = logging.getLogger(__name__)

# key -> (type, default); None defaults mean "derived" or "unset"
SCHEMA: Dict[str, tuple] = {
    "experiment.shapes": (list, list(TRAINING_SHAPES)),
    "experiment.episodes": (int, 30),
    "experiment.max_trials": (int, 15),
    "experiment.seed": (int, 0),
    "experiment.mode": (str, "sampled+extremes"),
    "experiment.grid_size": (int, 31),
    "experiment.threads": (int, 1),
    "shape.kind": (str, None),
    "shape.name": (str, None),
    "shape.radius": (float, None),
    "shape.width": (float, None),
    "shape.length": (float, None),
    "shape.circumradius": (float, None),
    "shape.corner_radius": (float, None),
    "shape.vertex_count": (int, 64),
    "gap.width": (float, None),
    "gap.clearance": (float, 2.0),
    "gap.block_top_z": (float, 0.0),
    "gap.block_extent_x": (float, 45.0),
    "gap.block_extent_y": (float, 155.0),
    "gap.target_depth": (float, 20.0),
    "errors.range_x_fraction": (float, 0.3),
    "errors.range_x": (float, None),
    "errors.range_theta": (float, 15.0),
    "contact.descent_per_frame": (float, 0.5),
    "contact.frames": (int, 8),
    "contact.min_lever": (float, 5.0),
    "tactile.grid_rows": (int, 9),
    "tactile.grid_cols": (int, 9),
    "tactile.marker_spacing": (float, 1.5),
    "tactile.patch_height": (float, 15.0),
    "tactile.pressure_gain": (float, 0.05),
    "tactile.noise_sigma": (float, 0.0),
    "tactile.tau_slip": (float, 3.0),
    "classifier.t_x": (float, 2.5),
    "classifier.t_theta": (float, 5.0),
    "estimator.kind": (str, "oracle"),
    "estimator.weights": (str, None),
    "noise.direction_accuracy": (float, 0.744),
    "noise.half_width_x": (float, 1.9),
    "noise.half_width_theta": (float, 1.9),
    "noise.distribution": (str, "uniform"),
    "controller.consistent_factor": (float, 0.7),
    "controller.no_sign_factor": (float, 0.3),
    "controller.constant_step_x": (float, 3.0),
    "controller.constant_step_theta": (float, 3.0),
    "controller.clip_x": (float, 4.0),
    "controller.clip_theta": (float, 4.0),
    "controller.clip_from_trial": (int, 2),
    "dataset.samples_per_shape": (int, 2000),
    "dataset.max_attempts_factor": (int, 20),
    "dataset.double_pure_rotation": (bool, True),
    "dataset.store_markers": (bool, True),
    "fit.reg_lambda": (float, 1e-3),
    "fit.holdout_fraction": (float, 0.2),
    "fit.max_iter": (int, 500),
}

ESTIMATOR_KINDS = ("oracle", "noisy", "linear")
EXPERIMENT_MODES = ("sampled", "grid", "sampled+extremes")


class ConfigError(ValueError):
    """Raised for unreadable, unknown or out-of-range configuration values."""


def _coerce(key: str, raw: Any, where: str) -> Any:
    kind = SCHEMA[key][0]
    try:
        if kind is list:
            items = raw if isinstance(raw, list) else str(raw).split(",")
            return [str(item).strip() for item in items if str(item).strip()]
        if kind is bool:
            if isinstance(raw, bool):
                return raw
            text = str(raw).strip().lower()
            if text not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return text in ("true", "1", "yes")
        if kind is int:
            value = float(raw)
            if value != int(value):
                raise ValueError(raw)
            return int(value)
        return kind(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: invalid {kind.__name__} for '{key}': {raw!r}") from None


class ConfigManager:
    """Loads, validates and serves experiment configuration."""

    def __init__(self, config_path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None):
        self.config_path = Path(config_path) if config_path else None
        self.config: Dict[str, Any] = {}
        self.explicit: Set[str] = set()
        self.load()
        if overrides:
            self.update(overrides)

    def load(self) -> Dict[str, Any]:
        """Load configuration from file (defaults only when no file is given)."""
        self.config = {}
        self.explicit = set()
        if self.config_path is not None:
            if not self.config_path.exists():
                raise FileNotFoundError(f"Config file not found: {self.config_path}")
            if self.config_path.suffix == ".json":
                self._load_json()
            else:
                self._load_text()
        self._validate()
        return self.config

    def _load_text(self) -> None:
        with open(self.config_path, "r") as f:
            for line_no, line in enumerate(f, start=1):
                text = line.split("#", 1)[0].strip()
                if not text:
                    continue
                where = f"{self.config_path}:{line_no}"
                if "=" not in text:
                    raise ConfigError(f"{where}: expected 'section.key = value', got {text!r}")
                key, raw = (part.strip() for part in text.split("=", 1))
                if key not in SCHEMA:
                    raise ConfigError(f"{where}: unknown config key '{key}'")
                self.config[key] = _coerce(key, raw, where)
                self.explicit.add(key)

    def _load_json(self) -> None:
        with open(self.config_path, "r") as f:
            data = json.load(f)
        flat: Dict[str, Any] = {}
        for key, value in data.items():
            if isinstance(value, dict):
                flat.update({f"{key}.{sub}": v for sub, v in value.items()})
            else:
                flat[key] = value
        for key, value in flat.items():
            where = f"{self.config_path}:{key}"
            if key not in SCHEMA:
                raise ConfigError(f"{where}: unknown config key '{key}'")
            self.config[key] = _coerce(key, value, where)
            self.explicit.add(key)

    def update(self, overrides: Dict[str, Any]) -> None:
        """Apply command-line overrides (None values are ignored)."""
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in SCHEMA:
                raise ConfigError(f"override: unknown config key '{key}'")
            self.config[key] = _coerce(key, value, "override")
            self.explicit.add(key)
        self._validate()

    def _validate(self) -> None:
        """Fill defaults and check ranges."""
        for key, (_, default) in SCHEMA.items():
            self.config.setdefault(key, list(default) if isinstance(default, list) else default)

        c = self.config
        if c["experiment.episodes"] < 0:
            raise ConfigError("experiment.episodes must be >= 0")
        if c["experiment.max_trials"] < 1:
            raise ConfigError("experiment.max_trials must be >= 1")
        if c["experiment.threads"] < 1:
            raise ConfigError("experiment.threads must be >= 1")
        if c["experiment.grid_size"] < 1:
            raise ConfigError("experiment.grid_size must be >= 1")
        if c["experiment.mode"] not in EXPERIMENT_MODES:
            raise ConfigError(f"experiment.mode must be one of {EXPERIMENT_MODES}")
        if c["shape.kind"] is not None and "experiment.shapes" in self.explicit:
            raise ConfigError(
                f"experiment.shapes {c['experiment.shapes']} conflicts with shape.kind = {c['shape.kind']}; "
                "set one or the other"
            )
        if c["shape.kind"] is None:
            for name in c["experiment.shapes"]:
                if name not in SHAPE_CATALOG:
                    raise ConfigError(f"experiment.shapes: unknown shape '{name}'")
            if not c["experiment.shapes"]:
                raise ConfigError("experiment.shapes must name at least one shape")

        if c["errors.range_x_fraction"] < 0 or c["errors.range_theta"] < 0:
            raise ConfigError("error ranges must be >= 0")
        if c["errors.range_x"] is not None and c["errors.range_x"] < 0:
            raise ConfigError("errors.range_x must be >= 0")
        if c["gap.width"] is not None and c["gap.width"] <= 0:
            raise ConfigError("gap.width must be > 0")
        if c["gap.clearance"] < 0:
            raise ConfigError("gap.clearance must be >= 0")

        if c["contact.descent_per_frame"] <= 0 or c["contact.min_lever"] <= 0:
            raise ConfigError("contact.descent_per_frame and contact.min_lever must be > 0")
        if c["contact.frames"] < 1:
            raise ConfigError("contact.frames must be >= 1")
        if c["tactile.tau_slip"] <= 0:
            raise ConfigError("tactile.tau_slip must be > 0")
        if c["tactile.noise_sigma"] < 0:
            raise ConfigError("tactile.noise_sigma must be >= 0")
        if c["classifier.t_x"] <= 0 or c["classifier.t_theta"] <= 0:
            raise ConfigError("classifier thresholds must be > 0")

        if c["estimator.kind"] not in ESTIMATOR_KINDS:
            raise ConfigError(f"estimator.kind must be one of {ESTIMATOR_KINDS}")
        if not 0 < c["noise.direction_accuracy"] <= 1:
            raise ConfigError("noise.direction_accuracy must be in (0, 1]")
        if c["noise.half_width_x"] < 0 or c["noise.half_width_theta"] < 0:
            raise ConfigError("noise half-widths must be >= 0")
        if c["noise.distribution"] not in ("uniform", "gaussian"):
            raise ConfigError("noise.distribution must be 'uniform' or 'gaussian'")

        if c["dataset.samples_per_shape"] < 1:
            raise ConfigError("dataset.samples_per_shape must be >= 1")
        if c["dataset.max_attempts_factor"] < 1:
            raise ConfigError("dataset.max_attempts_factor must be >= 1")
        if c["fit.reg_lambda"] < 0:
            raise ConfigError("fit.reg_lambda must be >= 0")
        if not 0 < c["fit.holdout_fraction"] < 1:
            raise ConfigError("fit.holdout_fraction must be in (0, 1)")

        try:
            ControllerParams.from_dict(self.section("controller"))
        except ValueError as e:
            raise ConfigError(str(e)) from None

    def section(self, name: str) -> Dict[str, Any]:
        """All keys of one section, prefix stripped."""
        prefix = f"{name}."
        return {k[len(prefix):]: v for k, v in self.config.items() if k.startswith(prefix)}

    def shape_names(self) -> List[str]:
        if self.config["shape.kind"] is not None:
            return [self.config["shape.name"] or self.config["shape.kind"]]
        return list(self.config["experiment.shapes"])

    def snapshot(self) -> Dict[str, Any]:
        return dict(sorted(self.config.items()))

    def save(self, path: str) -> None:
        """Write the effective configuration as a flat config file."""
        out_path = Path(path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        with open(out_path, "w") as f:
            for key, value in self.snapshot().items():
                if value is None:
                    continue
                if key == "experiment.shapes" and self.config["shape.kind"] is not None:
                    continue
                if isinstance(value, list):
                    value = ", ".join(value)
                elif isinstance(value, bool):
                    value = str(value).lower()
                f.write(f"{key} = {value}\n")

    def get(self, key: str, default=None):
        """Get configuration value by key."""
        return self.config.get(key, default)

    def __getitem__(self, key: str):
        """Get configuration value by key."""
        return self.config[key]
