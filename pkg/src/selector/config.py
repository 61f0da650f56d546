"""Pipeline configuration: one declarative file (JSON or YAML) plus flag overrides."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from selector.errors import ConfigError

HEURISTIC_CHOICES = ("cluster", "ds", "mis", "all")


@dataclass
class HarnessConfig:
    dimension: int = 2
    instances: int = 2
    runs: int = 30
    budget_per_dim: int = 500
    optimizers: list = field(default_factory=lambda: ["random_search", "one_plus_one_es", "de"])
    sample_factor: int = 50
    feature_repetitions: int = 30


@dataclass
class PipelineConfig:
    features: str | None = None
    performance: str | None = None
    harness: HarnessConfig | None = None
    heuristic: str = "all"
    thresholds: list = field(default_factory=lambda: [0.90, 0.95, 0.97])
    clusters_range: list = field(default_factory=lambda: [2, 30])
    min_total: int = 10
    sub_split: int | None = None
    pool_fraction: float | None = None
    cluster_repetitions: int = 15
    graph_repetitions: int = 30
    linkage: str = "average"
    centroid: str = "mean"
    rescale: bool = False
    drop: list = field(default_factory=lambda: ["ic.eps.s"])
    alpha: float = 0.05
    seed: int = 0
    out: str = "selector-out"
    strict: bool = False

    @property
    def source(self) -> str:
        return "files" if (self.features or self.performance) else "harness"

    def heuristics(self) -> list[str]:
        return ["cluster", "ds", "mis"] if self.heuristic == "all" else [self.heuristic]

    def harness_or_default(self) -> HarnessConfig:
        return self.harness or HarnessConfig()

    def validate(self) -> PipelineConfig:
        if self.heuristic not in HEURISTIC_CHOICES:
            raise ConfigError(f"heuristic must be one of {HEURISTIC_CHOICES}")
        if self.harness is not None and (self.features or self.performance):
            raise ConfigError("choose exactly one data source: input files or harness")
        for t in self.thresholds:
            if not -1.0 < float(t) <= 1.0:
                raise ConfigError(f"threshold {t} outside (-1, 1]")
        if not self.thresholds:
            raise ConfigError("at least one threshold is required")
        lo, hi = self.clusters_range
        if lo < 2 or hi < lo:
            raise ConfigError(f"invalid clusters range {self.clusters_range}")
        if self.cluster_repetitions < 1 or self.graph_repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.pool_fraction is not None and not 0 < self.pool_fraction <= 1:
            raise ConfigError("pool fraction must lie in (0, 1]")
        if self.sub_split is not None and self.sub_split < 1:
            raise ConfigError("sub-split must be >= 1")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        h = self.harness_or_default()
        if min(h.dimension, h.instances, h.runs, h.budget_per_dim, h.sample_factor,
               h.feature_repetitions) < 1:
            raise ConfigError("harness parameters must be positive")
        return self

    def resolved(self) -> dict:
        """Configuration as embedded in outputs; the output location is left out."""
        d = asdict(self)
        d.pop("out")
        if self.source == "harness":
            d["harness"] = asdict(self.harness_or_default())
        return d


def _from_dict(data: dict) -> PipelineConfig:
    data = dict(data)
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown configuration key(s): {', '.join(sorted(unknown))}")
    harness = data.pop("harness", None)
    try:
        cfg = PipelineConfig(**data)
        if harness is not None:
            cfg.harness = HarnessConfig(**harness)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping")
    return _from_dict(data)
