"""Monte Carlo experiments: many independent episodes per shape."""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple

import numpy as np

from episode_runner import EpisodeRecord, EpisodeRunner, ExperimentConfig, episode_seeds, sample_error
from experiment_history import ExperimentSummary
from geometry import ErrorState
from linear_estimator import LinearEstimator

logger = logging.getLogger(__name__)


def extreme_errors(cfg: ExperimentConfig) -> List[ErrorState]:
    """The four corners of the error range."""
    rx, rt = cfg.error_range_x, cfg.error_range_theta
    return [ErrorState(sx * rx, st * rt) for sx in (-1, 1) for st in (-1, 1)]


def grid_errors(cfg: ExperimentConfig) -> List[ErrorState]:
    """grid_size x grid_size initial errors spanning both ranges."""
    xs = np.linspace(-cfg.error_range_x, cfg.error_range_x, cfg.grid_size)
    thetas = np.linspace(-cfg.error_range_theta, cfg.error_range_theta, cfg.grid_size)
    if cfg.grid_size == 1:
        xs, thetas = np.zeros(1), np.zeros(1)
    return [ErrorState(float(x), float(t)) for x in xs for t in thetas]


def initial_errors(cfg: ExperimentConfig) -> List[Tuple[ErrorState, np.random.SeedSequence]]:
    """(initial error, noise stream) for every episode of the configured mode.

    Corners are appended in sampled+extremes mode only when at least one
    sampled episode is requested.
    """
    if cfg.mode == "grid":
        fixed = grid_errors(cfg)
        return [(error, episode_seeds(cfg.seed, i)[1]) for i, error in enumerate(fixed)]

    episodes = []
    for i in range(cfg.episodes):
        sample_seq, run_seq = episode_seeds(cfg.seed, i)
        episodes.append((sample_error(cfg, np.random.default_rng(sample_seq)), run_seq))
    if cfg.mode == "sampled+extremes" and cfg.episodes > 0:
        for j, error in enumerate(extreme_errors(cfg)):
            episodes.append((error, episode_seeds(cfg.seed, cfg.episodes + j)[1]))
    return episodes


def run_experiment(
    cfg: ExperimentConfig, threads: int = 1, linear: Optional[LinearEstimator] = None
) -> ExperimentSummary:
    """Run every episode; records come back in episode order whatever the thread count."""
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    runner = EpisodeRunner(cfg, linear)
    plan = initial_errors(cfg)

    def run_one(item: Tuple[int, Tuple[ErrorState, np.random.SeedSequence]]) -> EpisodeRecord:
        episode_id, (error, seed_seq) = item
        return runner.run(error, np.random.default_rng(seed_seq), episode_id)

    if threads == 1:
        records = [run_one(item) for item in enumerate(plan)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            records = list(executor.map(run_one, enumerate(plan)))

    summary = ExperimentSummary(cfg.shape.name, cfg.estimator, records)
    stats = summary.get_statistics()
    if stats["episodes"]:
        logger.info(
            f"{summary.shape} [{summary.estimator}]: {stats['episodes']} episodes, "
            f"success {stats['success_rate'] * 100:.1f}%, mean trials {stats['mean_trials']:.2f}, "
            f"max {stats['max_trials']}, failures {stats['failures']}"
        )
    else:
        logger.info(f"{summary.shape} [{summary.estimator}]: no episodes")
    return summary
