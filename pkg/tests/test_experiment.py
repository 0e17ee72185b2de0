from dataclasses import replace

import pytest

from config_manager import ConfigManager
from dataset_collector import collect_dataset
from episode_runner import ExperimentConfig, run_episode
from estimation import NoiseModel
from experiment_history import (
    SCHEMA_VERSION,
    ExperimentSummary,
    SchemaError,
    load_scatter_table,
    load_summary_table,
    write_results,
)
from experiment_runner import extreme_errors, grid_errors, initial_errors, run_experiment
from geometry import TRAINING_SHAPES, ErrorState, catalog_shape
from linear_estimator import fit_linear_estimator, save_weights
from report import format_table, merge_runs, report, report_runs
from run_manifest import RunManifest


def _cfg(name="rectangle", **kwargs):
    return ExperimentConfig(shape=catalog_shape(name).spec, **kwargs)


def _save_run(summaries, run_dir, schema_version=SCHEMA_VERSION):
    write_results(summaries, str(run_dir))
    RunManifest("experiment", str(run_dir), {}, 0, schema_version=schema_version).save()
    return str(run_dir)


def test_modes_plan_the_right_episodes():
    assert len(initial_errors(_cfg(episodes=5, mode="sampled"))) == 5
    with_corners = initial_errors(_cfg(episodes=5, mode="sampled+extremes"))
    assert len(with_corners) == 9
    assert [e for e, _ in with_corners[-4:]] == extreme_errors(_cfg())
    assert len(initial_errors(_cfg(mode="grid", grid_size=3))) == 9


def test_zero_episodes_skip_the_corners():
    assert initial_errors(_cfg(episodes=0)) == []
    summary = run_experiment(_cfg(episodes=0))
    assert summary.episodes == 0
    assert summary.get_statistics()["success_rate"] is None


def test_grid_spans_both_ranges():
    cfg = _cfg(mode="grid", grid_size=3)
    errors = grid_errors(cfg)
    assert errors[0] == ErrorState(-cfg.error_range_x, -cfg.error_range_theta)
    assert errors[4] == ErrorState(0.0, 0.0)
    assert grid_errors(_cfg(mode="grid", grid_size=1)) == [ErrorState(0.0, 0.0)]


def test_extremes_are_the_range_corners():
    cfg = _cfg()
    corners = {(e.dx, e.dtheta) for e in extreme_errors(cfg)}
    assert corners == {(s * cfg.error_range_x, t * 15.0) for s in (-1, 1) for t in (-1, 1)}


def test_thread_count_does_not_change_results():
    cfg = _cfg("hexagon", episodes=12, estimator="noisy", seed=3)
    serial = run_experiment(cfg, threads=1)
    pooled = run_experiment(cfg, threads=4)
    assert [r.to_rows() for r in serial.records] == [r.to_rows() for r in pooled.records]
    assert [r.episode_id for r in pooled.records] == list(range(16))


def test_result_files_are_byte_identical(tmp_path):
    cfg = _cfg("ellipse", episodes=10, estimator="noisy", seed=5)
    first = write_results([run_experiment(cfg)], str(tmp_path / "a"))
    second = write_results([run_experiment(cfg)], str(tmp_path / "b"))
    for name in ("episodes", "summary", "scatter"):
        with open(first[name], "rb") as fa, open(second[name], "rb") as fb:
            assert fa.read() == fb.read()


def test_seed_changes_the_samples():
    a = [e for e, _ in initial_errors(_cfg(episodes=3, seed=1))]
    b = [e for e, _ in initial_errors(_cfg(episodes=3, seed=2))]
    assert a[:3] != b[:3]


def test_summary_counts_failures_past_the_budget():
    cfg = _cfg(max_trials=1)
    summary = ExperimentSummary("rectangle", "oracle")
    summary.add_episode(run_episode(cfg, ErrorState(14.0, 0.0), rng_seed=0))
    summary.add_episode(run_episode(cfg, ErrorState(0.0, 0.0), rng_seed=0))
    stats = summary.get_statistics()
    assert stats["success_rate"] == 0.5
    assert stats["mean_trials"] == 1.5
    assert stats["max_trials"] == 2
    assert stats["failures"] == 1


def test_scatter_has_one_row_per_episode(tmp_path):
    summary = run_experiment(_cfg(episodes=6))
    paths = write_results([summary], str(tmp_path))
    assert len(load_scatter_table(str(tmp_path))) == 10
    with open(paths["episodes"]) as f:
        assert sum(1 for _ in f) == sum(len(r.trials) for r in summary.records)


def test_report_table_formats_rates(tmp_path):
    summary = ExperimentSummary("rectangle", "oracle")
    summary.add_episode(run_episode(_cfg(), ErrorState(14.0, 0.0), rng_seed=0))
    empty = ExperimentSummary("circle", "oracle")
    paths = report([summary, empty], str(tmp_path))
    with open(paths["report"]) as f:
        lines = f.read().splitlines()
    assert lines[0].split()[:2] == ["Shape", "Estimator"]
    assert "100.0%" in lines[2] and "3.00" in lines[2]
    assert lines[3].split()[:4] == ["circle", "oracle", "0", "-"]


def test_report_needs_summaries(tmp_path):
    with pytest.raises(ValueError):
        report([], str(tmp_path))


def test_merge_suffixes_colliding_rows(tmp_path):
    summary = run_experiment(_cfg(episodes=2))
    first = _save_run([summary], tmp_path / "morning")
    second = _save_run([summary], tmp_path / "evening")
    merged = merge_runs([first, second])
    assert list(merged["shape"]) == ["rectangle [morning]", "rectangle [evening]"]
    paths = report_runs([first, second], str(tmp_path / "combined"))
    with open(paths["report"]) as f:
        assert "rectangle [evening]" in f.read()


def test_distinct_rows_are_left_alone(tmp_path):
    first = _save_run([run_experiment(_cfg(episodes=2))], tmp_path / "a")
    second = _save_run([run_experiment(_cfg("circle", episodes=2))], tmp_path / "b")
    assert list(merge_runs([first, second])["shape"]) == ["rectangle", "circle"]


def test_schema_mismatch_is_refused(tmp_path):
    old = _save_run([run_experiment(_cfg(episodes=1))], tmp_path / "old", schema_version=SCHEMA_VERSION + 1)
    with pytest.raises(SchemaError):
        load_summary_table(old)
    with pytest.raises(FileNotFoundError):
        load_summary_table(str(tmp_path / "missing"))


def test_summary_table_reads_back(tmp_path):
    run_dir = _save_run([run_experiment(_cfg(episodes=4))], tmp_path / "run")
    table = load_summary_table(run_dir)
    assert table.loc[0, "episodes"] == 8
    assert "Success" in format_table(table)


@pytest.mark.slow
def test_oracle_grid_succeeds_everywhere():
    means = {}
    for name in TRAINING_SHAPES:
        summary = run_experiment(_cfg(name, mode="grid", grid_size=31), threads=4)
        assert summary.episodes == 961
        assert summary.success_rate == 1.0
        assert summary.mean_trials <= 5.0
        means[name] = summary.mean_trials
    assert max(means, key=means.get) == "rectangle"


@pytest.mark.slow
@pytest.mark.parametrize("name", TRAINING_SHAPES)
def test_noisy_estimator_keeps_high_success(name):
    summary = run_experiment(_cfg(name, episodes=100, estimator="noisy", mode="sampled", seed=7), threads=4)
    assert summary.success_rate >= 0.90
    assert summary.mean_trials <= 8.0


@pytest.mark.slow
def test_learned_estimator_generalises_to_new_objects(tmp_path):
    samples = []
    for name in TRAINING_SHAPES:
        samples.extend(s.as_training_row() for s in collect_dataset(_cfg(name), 2000))
    weights = save_weights(fit_linear_estimator(samples), str(tmp_path / "weights.txt"))

    summaries = []
    for name in ("white_box", "metal_can"):
        base = ExperimentConfig.from_config(ConfigManager(), name)
        cfg = replace(base, estimator="linear", weights_path=str(weights), episodes=100, mode="sampled")
        summary = run_experiment(cfg, threads=4)
        assert summary.success_rate >= 0.85
        summaries.append(summary)
    pooled = [r.trial_count for s in summaries for r in s.records]
    assert sum(pooled) / len(pooled) <= 8.0


@pytest.mark.slow
@pytest.mark.parametrize("name", TRAINING_SHAPES)
def test_worse_direction_accuracy_never_needs_fewer_trials(name):
    means = []
    for estimator, noise in (("oracle", NoiseModel()), ("noisy", NoiseModel()),
                             ("noisy", NoiseModel(direction_accuracy=0.01))):
        cfg = _cfg(name, episodes=500, estimator=estimator, noise=noise, mode="sampled", seed=11)
        summary = run_experiment(cfg, threads=4)
        assert summary.episodes == 500
        means.append(summary.mean_trials)
    assert means == sorted(means)
