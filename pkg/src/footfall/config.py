"""INI-style configuration shared by the CLI and the simulator.

Each section maps onto one config dataclass; keys are its field names.
Unknown sections are ignored so topology and settings can share one file.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace

from .bench import CorpusConfig
from .classify import Hyperparams
from .codec import CODEC_LASSO, GateConfig
from .errors import InvalidArgumentError
from .events import DetectorConfig
from .sparse import LassoConfig


@dataclass(frozen=True)
class ClassifierConfig:
    kind: str = "logistic"
    f_count: int = 7


@dataclass(frozen=True)
class SimulationConfig:
    windows_per_thing: int = 3
    train_footsteps_per_profile: int = 150


@dataclass(frozen=True)
class Settings:
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    lasso: LassoConfig = CODEC_LASSO
    gates: GateConfig = field(default_factory=GateConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)


def _coerce(value: str, like):
    if isinstance(like, bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(like, int):
        return int(value)
    if isinstance(like, float):
        return float(value)
    return value.strip()


def _section(cp, name: str, default):
    if not cp.has_section(name):
        return default
    known = {f.name for f in fields(default)}
    updates = {}
    for key, raw in cp[name].items():
        if key not in known:
            raise InvalidArgumentError(f"unknown key {key!r} in section [{name}]")
        try:
            updates[key] = _coerce(raw, getattr(default, key))
        except ValueError as exc:
            raise InvalidArgumentError(f"bad value for {name}.{key}: {raw!r}") from exc
    return replace(default, **updates)


def load_settings(path=None) -> Settings:
    s = Settings()
    if path is None:
        return s
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise InvalidArgumentError(f"cannot read config file {path}")
    return Settings(**{f.name: _section(cp, f.name, getattr(s, f.name)) for f in fields(s)})
