"""Declarative pipeline configuration: YAML file <-> PipelineConfig.

Unknown keys are rejected so typos fail loudly, and the resolved config
is echoed into every artifact the CLI writes.
"""

from __future__ import annotations

from dataclasses import asdict, fields
from pathlib import Path

import yaml

from .detector import DetectorConfig
from .errors import ConfigError
from .model import AerConfig
from .pipeline import PipelineConfig
from .scoring import FusionConfig

__all__ = ["config_to_dict", "config_from_dict", "load_config_file"]

_SECTIONS = {"model": AerConfig, "fusion": FusionConfig, "detector": DetectorConfig}


def config_to_dict(config: PipelineConfig) -> dict:
    """Plain-type dict (JSON/YAML friendly) of the full pipeline config."""
    out = asdict(config)
    return out


def _build(cls, payload: dict, where: str):
    if not isinstance(payload, dict):
        raise ConfigError(f"{where} must be a mapping, got {type(payload).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = set(payload) - known
    if unknown:
        raise ConfigError(f"unknown {where} keys: {sorted(unknown)}")
    try:
        return cls(**payload)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where} config: {exc}") from exc


def config_from_dict(payload: dict) -> PipelineConfig:
    if not isinstance(payload, dict):
        raise ConfigError(f"config must be a mapping, got {type(payload).__name__}")
    payload = dict(payload)
    kwargs = {}
    for section, cls in _SECTIONS.items():
        if section in payload:
            kwargs[section] = _build(cls, payload.pop(section) or {}, section)
    top_known = {f.name for f in fields(PipelineConfig)}
    unknown = set(payload) - top_known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs.update(payload)
    try:
        return PipelineConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


def load_config_file(path) -> PipelineConfig:
    path = Path(path)
    try:
        payload = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    if payload is None:
        payload = {}
    return config_from_dict(payload)
