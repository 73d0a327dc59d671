"""Run configuration: JSON document -> :class:`RunConfig`."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import jsonschema

from .pipeline import (
    ClassicalConfig,
    DeformConfig,
    RangeConfig,
    ReverbConfig,
    SnrConfig,
)


class ConfigError(Exception):
    pass


_SECTIONS = {
    "deform": DeformConfig,
    "reverb": ReverbConfig,
    "snr": SnrConfig,
    "classical": ClassicalConfig,
}


def schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("config.schema.json").read_text())


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    replicas: int = 1
    output: str | None = None
    ranges: RangeConfig = field(default_factory=RangeConfig)


def parse_config(doc: dict) -> RunConfig:
    """Validate a decoded JSON document against the schema and build a RunConfig."""
    try:
        jsonschema.validate(doc, schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    try:
        sections = {}
        for name, cls in _SECTIONS.items():
            values = {
                k: tuple(v) if isinstance(v, list) else v for k, v in doc.get(name, {}).items()
            }
            sections[name] = cls(**values)
        extra = {k: doc[k] for k in ("mode", "subset_probability") if k in doc}
        if "order" in doc:
            extra["order"] = tuple(doc["order"])
        ranges = RangeConfig(**sections, **extra)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(
        seed=doc.get("seed", 0),
        replicas=doc.get("replicas", 1),
        output=doc.get("output"),
        ranges=ranges,
    )


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None
    return parse_config(doc)
