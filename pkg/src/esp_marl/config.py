"""Experiment configuration: INI files with fixed sections and typed keys.

Sections are ``[run]``, ``[env]``, ``[trainer]`` and ``[esp]``. Every key has a
default; unknown sections or keys raise :class:`ConfigError` naming the path.
List values (element names) are comma separated.
"""

from __future__ import annotations

import configparser
import io
import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import get_type_hints

from esp_marl.envs import ENV_NAMES
from esp_marl.errors import ConfigError, InvalidArgument
from esp_marl.esp import EspConfig
from esp_marl.mappo import TrainerConfig

ALGORITHMS = ("mappo", "mappo_esp")
OUTPUT_ROOT_ENV = "ESP_MARL_OUTPUT_ROOT"


@dataclass
class RunConfig:
    algorithm: str = "mappo_esp"
    total_steps: int = 150_000
    seed: int = 0
    n_seeds: int = 5
    eval_every: int = 0
    eval_episodes: int = 50
    output_dir: str = "runs"
    log_wall_time: bool = True
    save_checkpoints: bool = True
    workers: int = 1


@dataclass
class EnvConfig:
    name: str = "coop_nav"
    n_agents: int = 3


@dataclass
class ExperimentConfig:
    run: RunConfig = field(default_factory=RunConfig)
    env: EnvConfig = field(default_factory=EnvConfig)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    esp: EspConfig = field(default_factory=EspConfig)

    SECTIONS = ("run", "env", "trainer", "esp")

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.run.total_steps <= 0:
            raise ConfigError("must be positive", "run.total_steps")
        if self.run.algorithm not in ALGORITHMS:
            raise ConfigError(f"must be one of {ALGORITHMS}", "run.algorithm")
        if self.env.name not in ENV_NAMES:
            raise ConfigError(f"must be one of {ENV_NAMES}", "env.name")
        if self.run.eval_episodes < 1:
            raise ConfigError("must be >= 1", "run.eval_episodes")
        if self.run.n_seeds < 1:
            raise ConfigError("must be >= 1", "run.n_seeds")
        if self.trainer.n_envs < 1 or self.trainer.horizon < 1:
            raise ConfigError("n_envs and horizon must be >= 1", "trainer")
        if self.run.algorithm == "mappo_esp" and not (self.esp.augment_enabled or self.esp.loss_enabled):
            raise ConfigError("mappo_esp needs augment_enabled or loss_enabled", "esp")

    @property
    def esp_active(self) -> bool:
        return self.run.algorithm == "mappo_esp"

    @property
    def augment_active(self) -> bool:
        return self.esp_active and self.esp.augment_enabled

    @property
    def loss_active(self) -> bool:
        return self.esp_active and self.esp.active_loss

    def with_overrides(self, **sections) -> "ExperimentConfig":
        """``cfg.with_overrides(run={"seed": 3}, esp={"c": 0.1})``."""
        parts = {}
        for name in self.SECTIONS:
            current = getattr(self, name)
            parts[name] = replace(current, **sections.get(name, {}))
        return ExperimentConfig(**parts)

    def to_dict(self) -> dict:
        return {name: asdict(getattr(self, name)) for name in self.SECTIONS}

    def to_ini(self) -> str:
        parser = configparser.ConfigParser(interpolation=None)
        for name in self.SECTIONS:
            parser[name] = {k: _format(v) for k, v in asdict(getattr(self, name)).items()}
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    def output_root(self) -> str:
        return os.environ.get(OUTPUT_ROOT_ENV, self.run.output_dir)


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (tuple, list)):
        return ", ".join(str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_value(raw: str, typ, key: str):
    raw = raw.strip()
    try:
        if typ is bool:
            low = raw.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(raw)
        if typ is int:
            return int(raw.replace("_", ""))
        if typ is float:
            return float(raw)
        if typ is tuple:
            return tuple(x.strip() for x in raw.split(",") if x.strip())
        return raw
    except ValueError as exc:
        raise ConfigError(f"cannot parse {raw!r} as {typ.__name__}", key) from exc


_SECTION_TYPES = {"run": RunConfig, "env": EnvConfig, "trainer": TrainerConfig, "esp": EspConfig}


def _field_types(cls) -> dict:
    hints = get_type_hints(cls)
    return {f.name: hints[f.name] for f in fields(cls)}


def config_from_dict(data: dict) -> ExperimentConfig:
    parts = {}
    for section, values in data.items():
        if section not in _SECTION_TYPES:
            raise ConfigError("unknown section", section)
        types = _field_types(_SECTION_TYPES[section])
        kwargs = {}
        for key, raw in values.items():
            if key not in types:
                raise ConfigError("unknown key", f"{section}.{key}")
            kwargs[key] = _parse_value(raw, types[key], f"{section}.{key}") if isinstance(raw, str) else raw
        try:
            parts[section] = _SECTION_TYPES[section](**kwargs)
        except InvalidArgument as exc:
            raise ConfigError(str(exc), section) from exc
    return ExperimentConfig(**parts)


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__",
                                       inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    return config_from_dict({s: dict(parser[s]) for s in parser.sections()})


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
