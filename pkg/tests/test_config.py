import glob
import os
import re

import pytest

from esp_marl.config import ExperimentConfig, load_config, parse_config
from esp_marl.errors import ConfigError

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")


def test_defaults():
    cfg = ExperimentConfig()
    assert cfg.run.algorithm == "mappo_esp" and cfg.run.total_steps == 150_000
    assert cfg.esp.c == 0.5 and cfg.esp.augmentation_elements == ("r90",)
    assert cfg.trainer.clip_eps == 0.2 and cfg.trainer.gae_lambda == 0.95


def test_parse_typed_values():
    cfg = parse_config("""
[run]
algorithm = mappo
total_steps = 10_000
log_wall_time = no
[esp]
augmentation_elements = r90, flipx
c = 0.25
""")
    assert cfg.run.algorithm == "mappo" and cfg.run.total_steps == 10_000
    assert cfg.run.log_wall_time is False
    assert cfg.esp.augmentation_elements == ("r90", "flipx") and cfg.esp.c == 0.25


@pytest.mark.parametrize("text, key", [
    ("[run]\nspeed = 3\n", "run.speed"),
    ("[network]\nwidth = 3\n", "network"),
    ("[run]\ntotal_steps = many\n", "run.total_steps"),
    ("[run]\ntotal_steps = 0\n", "run.total_steps"),
    ("[run]\nalgorithm = dqn\n", "run.algorithm"),
    ("[env]\nname = pong\n", "env.name"),
    ("[esp]\nc = -1\n", "esp"),
    ("[run]\nlog_wall_time = maybe\n", "run.log_wall_time"),
])
def test_bad_configs_name_the_key(text, key):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.key == key


def test_malformed_file():
    with pytest.raises(ConfigError):
        parse_config("total_steps = 3\n")


def test_ini_round_trip():
    cfg = ExperimentConfig().with_overrides(run={"seed": 7}, esp={"augmentation_elements": ("r90", "r180"), "c": 0.1})
    assert parse_config(cfg.to_ini()) == cfg


def test_with_overrides_validates():
    with pytest.raises(ConfigError):
        ExperimentConfig().with_overrides(esp={"augment_enabled": False, "loss_enabled": False})


def test_output_root_env_override(monkeypatch):
    monkeypatch.setenv("ESP_MARL_OUTPUT_ROOT", "/elsewhere")
    assert ExperimentConfig().output_root() == "/elsewhere"


@pytest.mark.parametrize("path", sorted(glob.glob(os.path.join(CONFIG_DIR, "*.ini"))))
def test_shipped_configs_load(path):
    load_config(path)


def test_inline_comments_are_ignored():
    cfg = parse_config("[run]\nalgorithm = mappo   # baseline\n[esp]\naugmentation_elements = r90, flipx ; two\n")
    assert cfg.run.algorithm == "mappo" and cfg.esp.augmentation_elements == ("r90", "flipx")


def test_readme_config_example_parses_to_defaults():
    readme = os.path.join(os.path.dirname(__file__), "..", "README.md")
    with open(readme, encoding="utf-8") as fh:
        block = re.search(r"```ini\n(.*?)```", fh.read(), re.S).group(1)
    assert parse_config(block) == ExperimentConfig()
