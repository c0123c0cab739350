"""Run configuration shared by the command-line subcommands."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .domain import BoundaryAtlas, ParamDomain, build_domain, make_atlas
from .metric import MetricField
from .tolerances import DEFAULT, Tolerances

CONFIG_VERSION = 1
_KEYS = ("version", "domain", "metric", "h", "receivers", "sources", "tolerances", "seed", "noise", "outputs")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    domain: dict
    metric: dict = field(default_factory=lambda: {"type": "euclidean"})
    h: float = 0.01
    receivers: int = 128
    sources: object = "grid:0.1"
    tolerances: Tolerances = DEFAULT
    seed: int = 0
    noise: float = 0.0
    outputs: dict = field(default_factory=dict)
    version: int = CONFIG_VERSION

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        unknown = sorted(set(data) - set(_KEYS))
        if unknown:
            raise ConfigError(f"unknown configuration keys {unknown}")
        if "version" not in data:
            raise ConfigError("configuration lacks a version tag")
        if data["version"] != CONFIG_VERSION:
            raise ConfigError(f"unsupported configuration version {data['version']!r}")
        if "domain" not in data:
            raise ConfigError("configuration lacks a domain")
        try:
            tol = Tolerances.from_dict(data.get("tolerances", {}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        kw = {k: v for k, v in data.items() if k != "tolerances"}
        cfg = cls(tolerances=tol, **kw)
        if not (isinstance(cfg.h, (int, float)) and cfg.h > 0):
            raise ConfigError("h must be positive")
        if not (isinstance(cfg.receivers, int) and cfg.receivers >= 8):
            raise ConfigError("receivers must be an integer >= 8")
        if not cfg.noise >= 0:
            raise ConfigError("noise must be non-negative")
        return cfg

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "domain": self.domain,
            "metric": self.metric,
            "h": self.h,
            "receivers": self.receivers,
            "sources": self.sources,
            "tolerances": self.tolerances.to_dict(),
            "seed": self.seed,
            "noise": self.noise,
            "outputs": self.outputs,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"configuration is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    # builders

    def build_domain(self) -> ParamDomain:
        return build_domain(self.domain, self.h)

    def build_field(self) -> MetricField:
        return MetricField.from_spec(self.metric)

    def build_atlas(self, domain: ParamDomain | None = None) -> BoundaryAtlas:
        return make_atlas(domain or self.build_domain(), self.receivers)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
    return RunConfig.loads(text)
