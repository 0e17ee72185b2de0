import numpy as np
import pytest

from config_manager import ConfigManager
from episode_runner import EpisodeRunner, ExperimentConfig, run_episode, sample_error
from estimation import DirectionClass, NoiseModel
from geometry import ErrorState, catalog_shape, fits_gap, make_cross_section
from tactile import FRAME_COUNT


@pytest.fixture
def rect_cfg():
    return ExperimentConfig(shape=catalog_shape("rectangle").spec)


def test_oracle_trace_from_fourteen_mm(rect_cfg):
    record = run_episode(rect_cfg, ErrorState(14.0, 0.0), rng_seed=0)
    assert record.success
    assert record.trial_count == 3
    first, second, third = record.trials
    assert first.blocked and first.class_true == DirectionClass.PLUS_X
    assert first.correction.c_x == pytest.approx(-9.8)
    assert second.blocked
    assert second.error_before.dx == pytest.approx(4.2)
    assert second.correction.c_x == pytest.approx(-2.94)
    assert not third.blocked
    assert third.error_before.dx == pytest.approx(1.26)
    assert third.estimate is None
    assert record.final_error.dx == pytest.approx(1.26)


def test_feasible_start_inserts_on_the_first_trial(rect_cfg):
    record = run_episode(rect_cfg, ErrorState(1.0, 0.5), rng_seed=0)
    assert record.success
    assert record.trial_count == 1
    assert not record.trials[0].blocked
    assert record.trials[0].slip_frame is None


def test_exact_noise_model_traces_like_the_oracle(rect_cfg):
    exact = ExperimentConfig(
        shape=rect_cfg.shape,
        estimator="noisy",
        noise=NoiseModel(direction_accuracy=1.0, half_width_x=0.0, half_width_theta=0.0),
    )
    for start in (ErrorState(14.0, 0.0), ErrorState(-11.0, 12.0), ErrorState(3.0, -14.0)):
        assert run_episode(exact, start, rng_seed=9) == run_episode(rect_cfg, start, rng_seed=9)


def test_failure_counts_one_past_the_budget(rect_cfg):
    short = ExperimentConfig(shape=rect_cfg.shape, max_trials=2)
    record = run_episode(short, ErrorState(14.0, 0.0), rng_seed=0)
    assert not record.success
    assert record.trial_count == 3
    assert record.blocked_trials == 2
    assert rect_cfg.failed_trial_count == 16


def test_blocked_trials_record_slip_frame(rect_cfg):
    record = run_episode(rect_cfg, ErrorState(14.0, 0.0), rng_seed=0)
    assert record.trials[0].slip_frame is not None
    assert 1 <= record.trials[0].slip_frame <= 8


def test_slip_frame_does_not_cut_the_sequence(rect_cfg):
    obs = EpisodeRunner(rect_cfg).observe(ErrorState(14.0, 0.0))
    assert obs.slip_frame is not None and obs.slip_frame < FRAME_COUNT
    shear = obs.sequence.shear
    # frames past the trip point keep growing at the same rate
    assert np.abs(shear[-1]).max() > np.abs(shear[obs.slip_frame - 1]).max()
    assert np.allclose(shear[-1], (FRAME_COUNT - 1) * shear[1])


def test_outcome_matches_geometry():
    shape = make_cross_section(catalog_shape("ellipse").spec)
    cfg = ExperimentConfig(shape=catalog_shape("ellipse").spec, estimator="noisy")
    runner = EpisodeRunner(cfg)
    rng = np.random.default_rng(11)
    for episode_id in range(40):
        record = runner.run(sample_error(cfg, rng), np.random.default_rng(episode_id), episode_id)
        if record.success:
            assert record.trial_count <= cfg.max_trials
            assert record.final_error == record.trials[-1].error_before
            assert fits_gap(shape, record.final_error, cfg.environment)
            assert all(t.blocked for t in record.trials[:-1])
        else:
            assert record.blocked_trials == cfg.max_trials
            assert record.trial_count == 16


def test_episodes_are_deterministic_per_seed(rect_cfg):
    noisy = ExperimentConfig(shape=rect_cfg.shape, estimator="noisy")
    start = ErrorState(-12.0, 9.0)
    assert run_episode(noisy, start, rng_seed=5) == run_episode(noisy, start, rng_seed=5)


def test_trial_rows_carry_the_log_fields(rect_cfg):
    rows = run_episode(rect_cfg, ErrorState(14.0, 0.0), rng_seed=0).to_rows()
    assert set(rows[0]) >= {
        "episode", "trial", "dx", "dtheta", "blocked", "side",
        "class_true", "class_est", "dxe", "dthetae", "cx", "ctheta",
    }
    assert rows[0]["class_true"] == "2"
    assert rows[-1]["class_est"] is None


def test_sampled_errors_are_uniform(rect_cfg):
    rng = np.random.default_rng(0)
    draws = np.array([[e.dx, e.dtheta] for e in (sample_error(rect_cfg, rng) for _ in range(100_000))])
    assert np.all(np.abs(draws[:, 0]) <= rect_cfg.error_range_x)
    assert np.all(np.abs(draws[:, 1]) <= rect_cfg.error_range_theta)
    assert abs(draws[:, 0].mean()) < 0.005 * 2 * rect_cfg.error_range_x
    assert abs(draws[:, 1].mean()) < 0.005 * 2 * rect_cfg.error_range_theta


def test_zero_ranges_sample_the_origin(rect_cfg):
    cfg = ExperimentConfig(shape=rect_cfg.shape, error_range_x=0.0, error_range_theta=0.0)
    for seed in range(5):
        assert sample_error(cfg, seed) == ErrorState(0.0, 0.0)


def test_default_x_range_is_thirty_percent_of_width(rect_cfg):
    assert rect_cfg.error_range_x == pytest.approx(15.3)


def test_linear_estimator_needs_weights(rect_cfg):
    with pytest.raises(ValueError):
        ExperimentConfig(shape=rect_cfg.shape, estimator="linear")


def test_config_for_new_object_keeps_two_mm_clearance():
    cfg = ExperimentConfig.from_config(ConfigManager(), "metal_can")
    assert cfg.environment.gap_width == pytest.approx(58.0)
    assert cfg.error_range_x == pytest.approx(0.3 * 54.0)
    assert ExperimentConfig.from_config(ConfigManager(), "rectangle").environment.gap_width == 56.0


def test_config_for_custom_shape(tmp_path):
    path = tmp_path / "custom.cfg"
    path.write_text("shape.kind = rounded_rectangle\nshape.name = tin\nshape.width = 40\n"
                    "shape.length = 60\nshape.corner_radius = 5\n")
    cm = ConfigManager(str(path))
    assert cm.shape_names() == ["tin"]
    cfg = ExperimentConfig.from_config(cm, "tin")
    assert cfg.shape.name == "tin"
    assert cfg.environment.gap_width == pytest.approx(44.0)
