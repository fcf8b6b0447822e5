"""Service configuration.

Plain ``key = value`` files with ``#`` comments. The KGTRIAGE_DATA_DIR
environment variable overrides the configured data directory.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .engine import AgentProfile, AggregationMode, EngineConfig, SpecialistSetRule, default_roster
from .errors import ConfigError

DATA_DIR_ENV = "KGTRIAGE_DATA_DIR"


def seed_path(name: str) -> Path:
    """Path of a packaged seed data file."""
    return Path(str(resources.files("kgtriage").joinpath("data", name)))


@dataclass
class ServiceConfig:
    tau: float = 0.7
    top_k: int = 5
    specialist_set_rule: SpecialistSetRule = SpecialistSetRule.SPECIALTY_NOT_GENERAL
    specialist_ids: frozenset[str] = frozenset()
    aggregation: AggregationMode = AggregationMode.UNIFORM
    max_clarifying_questions: int = 3
    host: str = "127.0.0.1"
    port: int = 8075
    data_dir: Path = field(default_factory=lambda: Path("kgtriage-data"))
    lexicon: Path = field(default_factory=lambda: seed_path("seed_lexicon.tsv"))
    patterns: Path = field(default_factory=lambda: seed_path("seed_patterns.tsv"))
    augmenter_endpoint: str | None = None
    augmenter_timeout: float = 10.0
    consultant_weights: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.max_clarifying_questions < 0:
            raise ConfigError("max_clarifying_questions must be >= 0")
        env_dir = os.environ.get(DATA_DIR_ENV)
        if env_dir:
            self.data_dir = Path(env_dir)

    def engine_config(self) -> EngineConfig:
        return EngineConfig(
            tau=self.tau,
            top_k=self.top_k,
            specialist_set_rule=self.specialist_set_rule,
            specialist_ids=self.specialist_ids,
            aggregation=self.aggregation,
        )

    def roster(self) -> list[AgentProfile]:
        agents = default_roster()
        if self.consultant_weights:
            unknown = set(self.consultant_weights) - {
                a.specialty.value for a in agents
            }
            if unknown:
                raise ConfigError(f"consultant_weights names unknown specialties: {sorted(unknown)}")
            for agent in agents:
                if agent.specialty.value in self.consultant_weights:
                    agent.weight = self.consultant_weights[agent.specialty.value]
        return agents


def _parse_weights(value: str) -> dict[str, float]:
    weights: dict[str, float] = {}
    for part in value.split(","):
        part = part.strip()
        if not part:
            continue
        name, _, raw = part.partition(":")
        weights[name.strip()] = float(raw)
    return weights


_PARSERS = {
    "tau": float,
    "top_k": int,
    "specialist_set_rule": SpecialistSetRule,
    "specialist_ids": lambda v: frozenset(s.strip() for s in v.split(",") if s.strip()),
    "aggregation": AggregationMode,
    "max_clarifying_questions": int,
    "host": str,
    "port": int,
    "data_dir": Path,
    "lexicon": Path,
    "patterns": Path,
    "augmenter_endpoint": lambda v: v or None,
    "augmenter_timeout": float,
    "consultant_weights": _parse_weights,
}


def parse_config(path: str | Path) -> ServiceConfig:
    """Read a ``key = value`` config file into a ServiceConfig."""
    values: dict[str, object] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        parser = _PARSERS.get(key)
        if parser is None:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = parser(value)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from exc
    try:
        return ServiceConfig(**values)  # type: ignore[arg-type]
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
