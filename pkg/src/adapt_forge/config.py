"""Runtime configuration: defaults, optional YAML file, env overrides."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Optional

import yaml

from .errors import ParseError, ValidationError
from .gates import GateThresholds, RegenerationPolicy


@dataclass(frozen=True)
class AppConfig:
    backend: str = "mock"
    remote_url: Optional[str] = None
    remote_model: Optional[str] = None
    remote_key: Optional[str] = None
    remote_timeout: float = 30.0
    readability_max: float = 38.0
    fidelity_min: float = 1.0
    consistency_min: float = 1.0
    max_attempts: int = 3
    escalate_on_exhaustion: bool = True
    data_dir: str = "./adapt-data"
    rules_path: Optional[str] = None
    catalog_path: Optional[str] = None
    templates_dir: Optional[str] = None
    pictograms_path: Optional[str] = None
    api_token: Optional[str] = None
    port: int = 8571

    def thresholds(self) -> GateThresholds:
        return GateThresholds(
            readability_max=self.readability_max,
            fidelity_min=self.fidelity_min,
            consistency_min=self.consistency_min,
        )

    def policy(self) -> RegenerationPolicy:
        return RegenerationPolicy(
            max_attempts=self.max_attempts,
            escalate_on_exhaustion=self.escalate_on_exhaustion,
        )

    def replace(self, **updates) -> "AppConfig":
        return replace(self, **updates)


_CONFIG_KEYS = {
    "backend": str,
    "remote_url": str,
    "remote_model": str,
    "remote_key": str,
    "remote_timeout": float,
    "readability_max": float,
    "fidelity_min": float,
    "consistency_min": float,
    "max_attempts": int,
    "escalate_on_exhaustion": bool,
    "data_dir": str,
    "rules_path": str,
    "catalog_path": str,
    "templates_dir": str,
    "pictograms_path": str,
    "api_token": str,
    "port": int,
}

_ENV_OVERRIDES = {
    "ADAPT_BACKEND": "backend",
    "ADAPT_REMOTE_URL": "remote_url",
    "ADAPT_REMOTE_MODEL": "remote_model",
    "ADAPT_REMOTE_KEY": "remote_key",
    "ADAPT_DATA_DIR": "data_dir",
    "ADAPT_API_TOKEN": "api_token",
}


def load_config(
    path: Optional[str] = None, env: Optional[Mapping[str, str]] = None
) -> AppConfig:
    """Defaults, then the YAML file, then environment variables."""
    env = os.environ if env is None else env
    config = AppConfig()

    if path is not None:
        file = Path(path)
        if not file.is_file():
            raise ValidationError(f"config file not found: {path}")
        try:
            doc = yaml.safe_load(file.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ParseError(f"config file is not valid YAML: {exc}") from None
        if not isinstance(doc, dict):
            raise ParseError("config file must hold a mapping")
        updates = {}
        for key, value in doc.items():
            if key not in _CONFIG_KEYS:
                raise ValidationError(f"unknown config key: {key}")
            caster = _CONFIG_KEYS[key]
            if value is not None and not isinstance(value, bool) and caster is bool:
                raise ValidationError(f"config key {key} must be boolean")
            updates[key] = value if value is None else caster(value)
        config = replace(config, **updates)

    env_updates = {}
    for env_key, config_key in _ENV_OVERRIDES.items():
        if env.get(env_key):
            env_updates[config_key] = env[env_key]
    if env_updates:
        config = replace(config, **env_updates)

    if config.backend not in ("mock", "remote"):
        raise ValidationError(
            f"backend must be 'mock' or 'remote', got {config.backend!r}"
        )
    if config.max_attempts < 1:
        raise ValidationError("max_attempts must be >= 1")
    return config
