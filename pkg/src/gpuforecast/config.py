"""Run configuration: INI file with per-stage sections, overridden by CLI flags.

Example::

    [synth]
    duration = 20000
    seed = 3
    job_power = 2000, 6000

    [preprocess]
    lookback = 300
    horizon = 90
    ratios = 0.7, 0.15, 0.15

    [train]
    arch = GRU
    hidden_size = 32
    max_epochs = 20

Keys are the field names of :class:`~gpuforecast.synth.SynthConfig`,
:class:`~gpuforecast.train.TrainConfig` and :class:`PreprocessConfig`.
Tuples are comma-separated. ``clip_norm = none`` disables clipping.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional

from .preprocess import DEFAULT_HORIZON, DEFAULT_LOOKBACK, DEFAULT_RATIOS
from .synth import SynthConfig
from .train import TrainConfig


class ConfigError(ValueError):
    """Bad config file or option; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class PreprocessConfig:
    lookback: int = DEFAULT_LOOKBACK
    horizon: int = DEFAULT_HORIZON
    ratios: tuple[float, float, float] = DEFAULT_RATIOS
    bucket: float = 1.0


@dataclass(frozen=True)
class RunConfig:
    synth: SynthConfig = field(default_factory=SynthConfig)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def with_overrides(self, section: str, **values) -> "RunConfig":
        values = {k: v for k, v in values.items() if v is not None}
        if not values:
            return self
        return _build(self, {section: values})


SECTIONS = {"synth": SynthConfig, "preprocess": PreprocessConfig, "train": TrainConfig}


def _coerce(key: str, raw: str, default: Any):
    text = raw.strip()
    try:
        if isinstance(default, bool):
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float) or default is None:
            return None if text.lower() == "none" else float(text)
        if isinstance(default, tuple):
            kind = type(default[0]) if default else float
            return tuple(kind(part) for part in text.split(",") if part.strip())
        return text
    except ValueError:
        raise ConfigError(key, f"cannot parse {raw!r}") from None


def _build(base: RunConfig, sections: Mapping[str, Mapping[str, Any]]) -> RunConfig:
    parts = {}
    for name, cls in SECTIONS.items():
        current = getattr(base, name)
        updates = dict(sections.get(name, {}))
        known = {f.name for f in dataclasses.fields(cls)}
        for key in updates:
            if key not in known:
                raise ConfigError(f"{name}.{key}", "unknown option")
        for key, value in list(updates.items()):
            if isinstance(value, str):
                updates[key] = _coerce(f"{name}.{key}", value, getattr(current, key))
        try:
            parts[name] = dataclasses.replace(current, **updates)
        except (TypeError, ValueError) as exc:
            key = next(iter(updates), "?")
            for k in updates:
                if k in str(exc):
                    key = k
                    break
            raise ConfigError(f"{name}.{key}", str(exc)) from None
    return RunConfig(**parts)


def load_run_config(path: Optional[str] = None) -> RunConfig:
    """Defaults, updated from ``path`` if given. Raises :class:`ConfigError`."""
    config = RunConfig()
    if path is None:
        return config
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config file ({exc.strerror})") from None
    except configparser.Error as exc:
        raise ConfigError(str(path), f"malformed config file: {exc.message}") from None
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(section, "unknown section")
    return _build(config, {s: dict(parser.items(s)) for s in parser.sections()})
