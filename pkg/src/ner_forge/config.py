"""Pipeline configuration: dataclass defaults, a TOML file, then command-line overrides."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .linker import MAX_IN_FLIGHT, default_endpoint
from .mapper import seed_table_paths


class ConfigError(ValueError):
    """Unusable configuration (exit code 2)."""


_SEED_PRIORITIES, _SEED_UNER_MAP = seed_table_paths()
PATH_FIELDS = ("dump_path", "cache_path", "priorities_path", "uner_map_path", "out_dir")


@dataclass
class PipelineConfig:
    out_dir: Path
    dump_path: Path | None = None
    language: str = "en"
    endpoint: str = field(default_factory=default_endpoint)
    cache_path: Path | None = None
    priorities_path: Path = _SEED_PRIORITIES
    uner_map_path: Path = _SEED_UNER_MAP
    articles_per_file: int = 100
    files_per_folder: int = 100
    max_in_flight: int = MAX_IN_FLIGHT
    min_interval: float = 0.1
    seed: int = 0
    workers: int = 1
    augment: bool = True

    def __post_init__(self):
        for name in PATH_FIELDS:
            value = getattr(self, name)
            if value is not None:
                setattr(self, name, Path(value))
        if self.cache_path is None:
            self.cache_path = self.out_dir.parent / f"{self.out_dir.name}.cache.jsonl"

    def validate(self) -> None:
        for name in ("articles_per_file", "files_per_folder", "max_in_flight", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.min_interval < 0:
            raise ConfigError("min_interval must be >= 0")
        paths = [getattr(self, n).resolve() for n in PATH_FIELDS if getattr(self, n) is not None]
        if len(set(paths)) != len(paths):
            raise ConfigError("configured paths must all be distinct")


def read_config_file(path: Path) -> dict[str, Any]:
    """Keys of a TOML config; relative paths are taken relative to the file."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    known = {f.name for f in dataclasses.fields(PipelineConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {', '.join(unknown)}")
    for name in PATH_FIELDS:
        if name in raw:
            p = Path(raw[name])
            raw[name] = p if p.is_absolute() else (path.parent / p)
    return raw


def make_config(file_values: dict[str, Any], overrides: dict[str, Any]) -> PipelineConfig:
    values = {**file_values, **{k: v for k, v in overrides.items() if v is not None}}
    if "out_dir" not in values:
        raise ConfigError("out_dir is required (config key or --out)")
    try:
        config = PipelineConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    config.validate()
    return config
