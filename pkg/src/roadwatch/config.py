"""Operator configuration with flags > env vars > config file > defaults."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional, Union

ENV_PREFIX = "ROADWATCH_"


class ConfigError(ValueError):
    pass


@dataclass
class Config:
    host: str = "127.0.0.1"
    wire_port: int = 7080
    api_port: int = 7081
    db_path: str = "roadwatch.db"
    geocoder: str = "gazetteer"  # gazetteer | external
    gazetteer_path: Optional[str] = None
    geocoder_url: Optional[str] = None
    telephony: str = "mock"  # mock | http
    telephony_url: Optional[str] = None
    telephony_token: Optional[str] = None
    emergency_number: str = "911"
    retry_max_attempts: int = 3
    retry_base_s: float = 1.0
    retry_factor: float = 2.0
    retry_cap_s: float = 30.0
    cors_origin: str = "*"

    def validate(self) -> None:
        if self.wire_port == self.api_port and self.wire_port != 0:
            raise ConfigError("wire_port and api_port must differ")
        if self.geocoder not in ("gazetteer", "external"):
            raise ConfigError(f"unknown geocoder mode {self.geocoder!r}")
        if self.geocoder == "external" and not self.geocoder_url:
            raise ConfigError("external geocoder needs geocoder_url")
        if self.telephony not in ("mock", "http"):
            raise ConfigError(f"unknown telephony mode {self.telephony!r}")
        if self.telephony == "http" and not self.telephony_url:
            raise ConfigError("http telephony needs telephony_url")
        if self.retry_max_attempts < 1:
            raise ConfigError("retry_max_attempts must be >= 1")


def _coerce(name: str, kind: type, value: str):
    try:
        if kind is int:
            return int(value)
        if kind is float:
            return float(value)
        return value
    except ValueError:
        raise ConfigError(f"bad value for {name}: {value!r}") from None


def load_config(
    config_file: Union[str, Path, None] = None,
    env: Optional[dict] = None,
    overrides: Optional[dict] = None,
) -> Config:
    """Build a Config by layering file, environment, then explicit overrides."""
    cfg = Config()
    typemap = {}
    for f in fields(Config):
        typemap[f.name] = type(getattr(cfg, f.name)) if getattr(cfg, f.name) is not None else str

    if config_file is not None:
        try:
            data = json.loads(Path(config_file).read_text())
        except (OSError, ValueError) as e:
            raise ConfigError(f"cannot read config file: {e}") from None
        for key, value in data.items():
            if key not in typemap:
                raise ConfigError(f"unknown config key {key!r}")
            setattr(cfg, key, value)

    env = os.environ if env is None else env
    for name, kind in typemap.items():
        raw = env.get(ENV_PREFIX + name.upper())
        if raw is not None:
            setattr(cfg, name, _coerce(name, kind, raw))

    for key, value in (overrides or {}).items():
        if value is not None:
            setattr(cfg, key, value)

    cfg.validate()
    return cfg
