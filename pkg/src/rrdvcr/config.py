"""Scenario configuration: field, traffic, radio, metric, and sweep axes.

A config holds the full cross product a sweep runs over (protocols,
deadlines, source counts, seeds) plus the scalar scenario parameters one run
needs.  It round-trips losslessly through JSON for replayable experiments.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .forwarding import MetricConfig
from .link_quality import DEFAULT_ED_SMOOTHING, DEFAULT_MAX_RETRY, DEFAULT_WINDOW
from .mac import EnergyModel, MediaDelayParams

PROTOCOLS = ("rrdvcr", "thvr", "speed")


class ConfigError(ValueError):
    """Invalid scenario configuration."""


@dataclass
class ScenarioConfig:
    # field and deployment
    field_width: float = 200.0
    field_height: float = 200.0
    density: float = 0.005  # nodes per square meter
    radio_range: float = 40.0
    topology: str = "poisson"  # or "line"
    line_nodes: int = 20
    source_anchor: tuple[float, float] = (15.0, 25.0)
    sink_anchor: tuple[float, float] = (155.0, 125.0)

    # traffic
    packet_interval_s: float = 1.0
    packet_bytes: int = 150
    sim_seconds: float = 300.0
    tick_seconds: float = 2.0

    # sweep axes
    protocols: list[str] = field(default_factory=lambda: ["rrdvcr"])
    deadlines_ms: list[float] = field(
        default_factory=lambda: [900, 1000, 1100, 1200, 1300, 1400, 1500, 1600, 1700, 1800]
    )
    source_counts: list[int] = field(default_factory=lambda: [1])
    seeds: list[int] = field(default_factory=lambda: list(range(1, 6)))

    # link model
    initial_energy_j: float = 5.0
    # batteries start partially drained (uniform per node) so residual
    # energy actually differentiates forwarding candidates
    initial_charge_min: float = 0.5
    initial_charge_max: float = 1.0
    link_exponent: float = 8.0
    link_floor: float = 0.05
    congestion_penalty: float = 0.03  # delivery-probability loss per extra source
    window_size: int = DEFAULT_WINDOW
    max_retry: int = DEFAULT_MAX_RETRY
    ed_smoothing: float = DEFAULT_ED_SMOOTHING

    # node failure study
    failure_prob_max: float = 0.0

    metric: MetricConfig = field(default_factory=MetricConfig)
    media: MediaDelayParams = field(default_factory=MediaDelayParams)
    energy: EnergyModel = field(default_factory=EnergyModel)

    # engine knobs
    validate_decisions: bool = True

    def __post_init__(self):
        if self.field_width <= 0 or self.field_height <= 0:
            raise ConfigError("field dimensions must be positive")
        if self.density <= 0:
            raise ConfigError("density must be positive")
        if self.radio_range <= 0:
            raise ConfigError("radio_range must be positive")
        if self.topology not in ("poisson", "line"):
            raise ConfigError(f"unknown topology {self.topology!r}")
        if self.packet_interval_s <= 0 or self.sim_seconds <= 0:
            raise ConfigError("traffic timing must be positive")
        if self.tick_seconds <= 0:
            raise ConfigError("tick_seconds must be positive")
        for p in self.protocols:
            if p not in PROTOCOLS:
                raise ConfigError(f"unknown protocol {p!r}")
        if any(d <= 0 for d in self.deadlines_ms):
            raise ConfigError("deadlines must be positive")
        if any(s < 1 for s in self.source_counts):
            raise ConfigError("source counts must be >= 1")
        if not 0.0 <= self.failure_prob_max <= 1.0:
            raise ConfigError("failure_prob_max must be in [0, 1]")
        if not 0.0 < self.initial_charge_min <= self.initial_charge_max <= 1.0:
            raise ConfigError("initial charge range must satisfy 0 < min <= max <= 1")
        if isinstance(self.source_anchor, list):
            self.source_anchor = tuple(self.source_anchor)
        if isinstance(self.sink_anchor, list):
            self.sink_anchor = tuple(self.sink_anchor)

    @property
    def packet_bits(self) -> int:
        return self.packet_bytes * 8

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["source_anchor"] = list(self.source_anchor)
        doc["sink_anchor"] = list(self.sink_anchor)
        return doc

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioConfig":
        doc = dict(doc)
        try:
            if "metric" in doc:
                doc["metric"] = MetricConfig(**doc["metric"])
            if "media" in doc:
                doc["media"] = MediaDelayParams(**doc["media"])
            if "energy" in doc:
                doc["energy"] = EnergyModel(**doc["energy"])
            return cls(**doc)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON config: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config document must be a JSON object")
        return cls.from_dict(doc)
