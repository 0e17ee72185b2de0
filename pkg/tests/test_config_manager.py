import json

import pytest

from config_manager import ConfigError, ConfigManager


def _write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_defaults_without_a_file():
    cm = ConfigManager()
    assert cm["experiment.max_trials"] == 15
    assert cm["experiment.shapes"] == ["rectangle", "circle", "ellipse", "hexagon"]
    assert cm["classifier.t_x"] == 2.5
    assert cm["noise.direction_accuracy"] == 0.744
    assert cm["controller.clip_from_trial"] == 2
    assert cm["gap.width"] is None
    assert cm.get("missing.key", "fallback") == "fallback"


def test_flat_file_with_comments(tmp_path):
    cm = ConfigManager(_write(tmp_path, "# header\n\nexperiment.episodes = 12  # inline\n"
                                        "experiment.shapes = circle, hexagon\n"
                                        "dataset.double_pure_rotation = false\n"))
    assert cm["experiment.episodes"] == 12
    assert cm["experiment.shapes"] == ["circle", "hexagon"]
    assert cm["dataset.double_pure_rotation"] is False


def test_json_file_with_sections(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"experiment": {"seed": 9}, "estimator.kind": "noisy"}))
    cm = ConfigManager(str(path))
    assert cm["experiment.seed"] == 9
    assert cm["estimator.kind"] == "noisy"


def test_unknown_key_names_file_and_line(tmp_path):
    path = _write(tmp_path, "experiment.seed = 1\nexperiment.sede = 2\n")
    with pytest.raises(ConfigError, match=r"run\.cfg:2: unknown config key 'experiment\.sede'"):
        ConfigManager(path)


def test_malformed_line(tmp_path):
    with pytest.raises(ConfigError, match=":1:"):
        ConfigManager(_write(tmp_path, "just words\n"))


def test_bad_value_type(tmp_path):
    with pytest.raises(ConfigError, match="experiment.episodes"):
        ConfigManager(_write(tmp_path, "experiment.episodes = lots\n"))


@pytest.mark.parametrize("line", [
    "experiment.max_trials = 0",
    "noise.direction_accuracy = 1.5",
    "estimator.kind = psychic",
    "experiment.shapes = teapot",
    "controller.clip_x = -1",
    "controller.clip_from_trial = 1",
    "fit.holdout_fraction = 1",
])
def test_out_of_range_values(tmp_path, line):
    with pytest.raises(ConfigError):
        ConfigManager(_write(tmp_path, line + "\n"))


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        ConfigManager("/nonexistent/run.cfg")


def test_overrides_apply_and_skip_none():
    cm = ConfigManager(overrides={"experiment.seed": 4, "estimator.kind": None, "experiment.shapes": "circle"})
    assert cm["experiment.seed"] == 4
    assert cm["estimator.kind"] == "oracle"
    assert cm.shape_names() == ["circle"]


def test_section_strips_prefix():
    section = ConfigManager().section("classifier")
    assert section == {"t_x": 2.5, "t_theta": 5.0}


def test_saved_config_loads_back(tmp_path):
    cm = ConfigManager(overrides={"experiment.seed": 17, "experiment.shapes": "ellipse, circle"})
    path = tmp_path / "saved.cfg"
    cm.save(str(path))
    assert ConfigManager(str(path)).snapshot() == cm.snapshot()


_CUSTOM = "shape.kind = circle\nshape.name = puck\nshape.radius = 20\n"


def test_shape_list_next_to_a_custom_shape_is_refused(tmp_path):
    with pytest.raises(ConfigError, match="shape.kind"):
        ConfigManager(_write(tmp_path, _CUSTOM + "experiment.shapes = rectangle\n"))
    with pytest.raises(ConfigError, match="experiment.shapes"):
        ConfigManager(_write(tmp_path, _CUSTOM), overrides={"experiment.shapes": "hexagon"})


def test_custom_shape_config_saves_and_loads_back(tmp_path):
    cm = ConfigManager(_write(tmp_path, _CUSTOM))
    assert cm.shape_names() == ["puck"]
    path = tmp_path / "saved.cfg"
    cm.save(str(path))
    assert "experiment.shapes" not in path.read_text()
    assert ConfigManager(str(path)).snapshot() == cm.snapshot()
