"""Probe-correct episodes: descend, read the tactile imprint, correct, retry."""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from config_manager import ESTIMATOR_KINDS, ConfigError, ConfigManager
from contact import ContactEvent, Side, decompose_twist, descend, pivot_twist
from controller import ControllerParams, Correction, CorrectionController, apply
from estimation import (
    ClassifierThresholds,
    DirectionClass,
    ErrorEstimate,
    NoiseModel,
    class_to_signs,
    label_contact,
    noisy_estimate,
    oracle_estimate,
)
from geometry import (
    TRAINING_GAP_WIDTH,
    CrossSection,
    ErrorState,
    GapEnvironment,
    ShapeSpec,
    catalog_shape,
    exceeds_block_length,
    make_cross_section,
)
from linear_estimator import LinearEstimator, load_weights, predict
from tactile import SensorLayout, TactileSequence, first_slip_frame, render_sequence

logger = logging.getLogger(__name__)

SeedLike = Union[None, int, np.random.SeedSequence, np.random.Generator]

DEFAULT_RANGE_X_FRACTION = 0.3


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one shape's episodes need; error_range_x defaults to 30% of the width."""
    shape: ShapeSpec
    environment: GapEnvironment = field(default_factory=GapEnvironment)
    error_range_x: Optional[float] = None
    error_range_theta: float = 15.0
    max_trials: int = 15
    episodes: int = 30
    estimator: str = "oracle"
    weights_path: Optional[str] = None
    noise: NoiseModel = field(default_factory=NoiseModel)
    thresholds: ClassifierThresholds = field(default_factory=ClassifierThresholds)
    controller: ControllerParams = field(default_factory=ControllerParams)
    layout: SensorLayout = field(default_factory=SensorLayout)
    descent_per_frame: float = 0.5
    frames: int = 8
    min_lever: float = 5.0
    noise_sigma: float = 0.0
    tau_slip: float = 3.0
    vertex_count: int = 64
    seed: int = 0
    mode: str = "sampled+extremes"
    grid_size: int = 31

    def __post_init__(self):
        if self.error_range_x is None:
            object.__setattr__(self, "error_range_x", DEFAULT_RANGE_X_FRACTION * self.shape.nominal_width)
        if self.error_range_x < 0 or self.error_range_theta < 0:
            raise ValueError("error ranges must be >= 0")
        if self.max_trials < 1:
            raise ValueError(f"max_trials must be >= 1, got {self.max_trials}")
        if self.episodes < 0:
            raise ValueError(f"episodes must be >= 0, got {self.episodes}")
        if self.estimator not in ESTIMATOR_KINDS:
            raise ValueError(f"unknown estimator '{self.estimator}'")
        if self.estimator == "linear" and not self.weights_path:
            raise ValueError("the linear estimator needs a weights file")

    @property
    def failed_trial_count(self) -> int:
        return self.max_trials + 1

    @classmethod
    def from_config(cls, cm: ConfigManager, shape_name: str) -> "ExperimentConfig":
        """Build the per-shape configuration from a loaded ConfigManager."""
        if cm["shape.kind"] is not None:
            params = {
                k: v for k, v in cm.section("shape").items()
                if k not in ("kind", "name", "vertex_count") and v is not None
            }
            try:
                spec = ShapeSpec(cm["shape.kind"], params, cm["shape.name"] or "")
            except ValueError as e:
                raise ConfigError(f"shape: {e}") from None
            default_gap = spec.nominal_width + 2 * cm["gap.clearance"]
        else:
            entry = catalog_shape(shape_name)
            spec = entry.spec
            default_gap = TRAINING_GAP_WIDTH if entry.training else spec.nominal_width + 2 * cm["gap.clearance"]

        environment = GapEnvironment(
            gap_width=cm["gap.width"] if cm["gap.width"] is not None else default_gap,
            block_top_z=cm["gap.block_top_z"],
            block_extent_x=cm["gap.block_extent_x"],
            block_extent_y=cm["gap.block_extent_y"],
            target_depth=cm["gap.target_depth"],
        )
        range_x = cm["errors.range_x"]
        if range_x is None:
            range_x = cm["errors.range_x_fraction"] * spec.nominal_width

        return cls(
            shape=spec,
            environment=environment,
            error_range_x=range_x,
            error_range_theta=cm["errors.range_theta"],
            max_trials=cm["experiment.max_trials"],
            episodes=cm["experiment.episodes"],
            estimator=cm["estimator.kind"],
            weights_path=cm["estimator.weights"],
            noise=NoiseModel(**cm.section("noise")),
            thresholds=ClassifierThresholds(**cm.section("classifier")),
            controller=ControllerParams.from_dict(cm.section("controller")),
            layout=SensorLayout(
                grid_rows=cm["tactile.grid_rows"],
                grid_cols=cm["tactile.grid_cols"],
                marker_spacing=cm["tactile.marker_spacing"],
                patch_height=cm["tactile.patch_height"],
                pressure_gain=cm["tactile.pressure_gain"],
            ),
            descent_per_frame=cm["contact.descent_per_frame"],
            frames=cm["contact.frames"],
            min_lever=cm["contact.min_lever"],
            noise_sigma=cm["tactile.noise_sigma"],
            tau_slip=cm["tactile.tau_slip"],
            vertex_count=cm["shape.vertex_count"],
            seed=cm["experiment.seed"],
            mode=cm["experiment.mode"],
            grid_size=cm["experiment.grid_size"],
        )


@dataclass(frozen=True)
class TrialRecord:
    trial_index: int
    error_before: ErrorState
    blocked: bool
    side: Side
    class_true: DirectionClass
    class_est: Optional[DirectionClass] = None
    estimate: Optional[ErrorEstimate] = None
    correction: Optional[Correction] = None
    slip_frame: Optional[int] = None

    def to_dict(self, episode_id: int) -> Dict:
        """One line of the episode JSONL log."""
        return {
            "episode": episode_id,
            "trial": self.trial_index,
            "dx": self.error_before.dx,
            "dtheta": self.error_before.dtheta,
            "blocked": self.blocked,
            "side": self.side.value,
            "class_true": self.class_true.label,
            "class_est": self.class_est.label if self.class_est is not None else None,
            "dxe": self.estimate.dx_e if self.estimate else None,
            "dthetae": self.estimate.dtheta_e if self.estimate else None,
            "cx": self.correction.c_x if self.correction else None,
            "ctheta": self.correction.c_theta if self.correction else None,
            "slip_frame": self.slip_frame,
        }


@dataclass(frozen=True)
class EpisodeRecord:
    episode_id: int
    initial_error: ErrorState
    trials: Tuple[TrialRecord, ...]
    success: bool
    trial_count: int

    @property
    def blocked_trials(self) -> int:
        return sum(1 for t in self.trials if t.blocked)

    @property
    def final_error(self) -> ErrorState:
        last = self.trials[-1]
        if last.correction is None:
            return last.error_before
        return apply(last.error_before, last.correction)

    def to_rows(self) -> List[Dict]:
        return [t.to_dict(self.episode_id) for t in self.trials]


@dataclass(frozen=True)
class Observation:
    """What one descent produced.

    slip_frame is diagnostic only: it is logged and recorded per trial, and
    the sequence always holds the full frame window.
    """
    event: ContactEvent
    sequence: Optional[TactileSequence] = None
    slip_frame: Optional[int] = None


def sample_error(cfg: ExperimentConfig, rng: SeedLike = None) -> ErrorState:
    """Uniform, independent draws over the configured error ranges."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    dx = rng.uniform(-cfg.error_range_x, cfg.error_range_x)
    dtheta = rng.uniform(-cfg.error_range_theta, cfg.error_range_theta)
    return ErrorState(float(dx), float(dtheta))


class EpisodeRunner:
    """Runs probe-correct episodes for one shape; safe to share across threads."""

    def __init__(self, cfg: ExperimentConfig, linear: Optional[LinearEstimator] = None):
        self.cfg = cfg
        self.shape: CrossSection = make_cross_section(cfg.shape, cfg.vertex_count)
        self.controller = CorrectionController(cfg.controller)
        self.linear = linear
        if cfg.estimator == "linear" and self.linear is None:
            self.linear = load_weights(cfg.weights_path)
        if exceeds_block_length(self.shape, cfg.environment):
            logger.warning(f"{cfg.shape.name} is longer than the environment blocks")

    def observe(self, error: ErrorState, rng: Optional[np.random.Generator] = None) -> Observation:
        """Descend once; a blocked contact is rendered into a tactile sequence.

        The slip monitor only reports the frame it trips on; frames after it
        are kept and reach the estimator unchanged.
        """
        cfg = self.cfg
        event = descend(self.shape, error, cfg.environment)
        if not event.blocked:
            return Observation(event)

        twist = pivot_twist(event, cfg.descent_per_frame, cfg.frames, cfg.min_lever)
        decomp = decompose_twist(twist, event)
        seq = render_sequence(decomp, twist, cfg.layout, cfg.noise_sigma, rng)
        return Observation(event, seq, first_slip_frame(seq, cfg.tau_slip))

    def estimate(
        self, error: ErrorState, truth: DirectionClass, seq: TactileSequence, rng: np.random.Generator
    ) -> Tuple[DirectionClass, ErrorEstimate]:
        kind = self.cfg.estimator
        if kind == "oracle":
            return truth, oracle_estimate(error)
        if kind == "noisy":
            return noisy_estimate(error, self.cfg.noise, self.cfg.thresholds, rng, truth=truth)
        return predict(self.linear, seq, self.cfg.thresholds)

    def run(self, initial_error: ErrorState, rng_seed: SeedLike = None, episode_id: int = 0) -> EpisodeRecord:
        cfg = self.cfg
        rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
        error = initial_error
        trials: List[TrialRecord] = []

        for trial_index in range(1, cfg.max_trials + 1):
            obs = self.observe(error, rng)
            class_true, _ = label_contact(error, cfg.thresholds, blocked=obs.event.blocked)

            if not obs.event.blocked:
                trials.append(TrialRecord(trial_index, error, False, obs.event.side, class_true))
                logger.debug(f"Episode {episode_id}: inserted on trial {trial_index}")
                return EpisodeRecord(episode_id, initial_error, tuple(trials), True, trial_index)

            if obs.slip_frame is None:
                logger.warning(
                    f"Episode {episode_id} trial {trial_index}: slip never reached "
                    f"{cfg.tau_slip} mm ({obs.event.side.value} contact)"
                )

            class_est, estimate = self.estimate(error, class_true, obs.sequence, rng)
            corr = self.controller.correction(class_to_signs(class_est), estimate, trial_index)
            trials.append(TrialRecord(
                trial_index, error, True, obs.event.side, class_true, class_est, estimate, corr, obs.slip_frame,
            ))
            logger.debug(
                f"Episode {episode_id} trial {trial_index}: error=({error.dx:.2f}, {error.dtheta:.2f}) "
                f"class {class_true.label}->{class_est.label} correction=({corr.c_x:.2f}, {corr.c_theta:.2f})"
            )
            error = apply(error, corr)

        return EpisodeRecord(episode_id, initial_error, tuple(trials), False, cfg.failed_trial_count)


def run_episode(
    cfg: ExperimentConfig,
    initial_error: ErrorState,
    rng_seed: SeedLike = None,
    linear: Optional[LinearEstimator] = None,
) -> EpisodeRecord:
    return EpisodeRunner(cfg, linear).run(initial_error, rng_seed)


def episode_seeds(seed: int, episode_id: int) -> Tuple[np.random.SeedSequence, np.random.SeedSequence]:
    """Independent (sampling, noise) streams for one episode."""
    sample_seq, run_seq = np.random.SeedSequence([seed, episode_id]).spawn(2)
    return sample_seq, run_seq
