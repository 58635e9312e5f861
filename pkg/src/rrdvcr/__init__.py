"""Deterministic WSN simulator for real-time QoS routing.

Implements RRDVCR (hop-gradient virtual-coordinate routing with two-hop
forwarding, capped-transmission-count link quality, and a deadline-adaptive
metric weight) next to THVR-style and SPEED-style baselines, inside a
seeded discrete-event engine with energy accounting.
"""

from .config import PROTOCOLS, ConfigError, ScenarioConfig
from .engine import Packet, RunMetrics, run_scenario
from .forwarding import (
    Candidate,
    Decision,
    MetricConfig,
    f_rt,
    required_speed,
    rrdvcr_metric,
    select_forwarder,
    thvr_metric,
    two_hop_speed,
)
from .link_quality import LinkQualityConfig, LinkStats, etx, mtx, pl_min, psucc
from .mac import EnergyModel, MediaDelayParams, attempt_hop, charge, estimate_ed
from .neighbor import (
    NeighborTables,
    collect_two_hop,
    one_hop_forwarders,
    select_cover,
    two_hop_forwarders,
)
from .topology import (
    NodeState,
    Position,
    Topology,
    build_height_gradient,
    deploy_line,
    deploy_poisson,
    radio_neighbors,
)

__version__ = "0.1.0"
