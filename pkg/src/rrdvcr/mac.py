"""Media-access timing, stochastic hop attempts, and energy accounting.

One hop attempt is a capped sequence of Bernoulli transmission trials; the
attempt count follows a truncated geometric law.  Per-attempt air time is
modeled at its expectation (mean random back-off, data serialization, then
the short-inter-frame gap and acknowledgement), which keeps hop timing
deterministic given the trial outcomes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .link_quality import LinkStats, record_outcome
from .topology import NodeState

TX = "tx"
RX = "rx"


@dataclass
class MediaDelayParams:
    """Timing constants of the one-hop media-delay estimate."""

    t_boff_max: float = 0.03  # uniform back-off upper bound, seconds
    bitrate: float = 19200.0  # bits per second on air
    t_sifs: float = 0.001
    t_ack: float = 0.010

    def __post_init__(self):
        for name in ("t_boff_max", "t_sifs", "t_ack"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.bitrate <= 0:
            raise ValueError("bitrate must be positive")


@dataclass
class EnergyModel:
    """Radio energy constants (per-bit costs, MPR400-class defaults)."""

    tx_per_bit: float = 2.1e-6  # joules
    rx_per_bit: float = 0.78e-6
    idle_per_second: float = 0.0
    control_packet_bits: int = 256

    def ack_bits(self, params: MediaDelayParams) -> int:
        return int(round(params.t_ack * params.bitrate))


@dataclass(frozen=True)
class HopOutcome:
    delivered: bool
    attempts: int
    elapsed: float


def estimate_ed(params: MediaDelayParams, packet_bits: int, candidate_index: int) -> float:
    """Expected one-hop media delay for the candidate ranked ``candidate_index``.

    Mean back-off plus data serialization, plus one coordination slot
    (inter-frame gap and acknowledgement) per candidate rank.
    """
    if candidate_index < 0:
        raise ValueError("candidate_index must be >= 0")
    return (
        params.t_boff_max / 2.0
        + packet_bits / params.bitrate
        + candidate_index * (params.t_sifs + params.t_ack)
    )


def attempt_slot(params: MediaDelayParams, packet_bits: int) -> float:
    """Wall-clock cost of a single transmission attempt (success or not)."""
    return estimate_ed(params, packet_bits, 1)


def draw_attempts(u: float, p: float, max_retry: int) -> tuple[int, bool]:
    """Map one uniform draw to (attempts, delivered) under capped retries.

    Inverse-CDF sampling of the first-success trial index of a Bernoulli(p)
    sequence, truncated at ``max_retry``; identical in law to simulating the
    trials one by one.
    """
    if p <= 0.0:
        return max_retry, False
    if p >= 1.0:
        return 1, True
    g = 1 + int(math.floor(math.log(1.0 - u) / math.log(1.0 - p)))
    if g > max_retry:
        return max_retry, False
    return g, True


def attempt_hop(
    link: LinkStats,
    true_p: float,
    max_retry: int,
    rng,
    params: MediaDelayParams,
    packet_bits: int,
) -> HopOutcome:
    """Attempt one hop over ``link`` with up to ``max_retry`` transmissions.

    Every trial outcome is recorded into the link's window; elapsed time is
    the attempt count times the per-attempt slot.
    """
    attempts, delivered = draw_attempts(rng.random(), true_p, max_retry)
    failures = attempts - 1 if delivered else attempts
    for _ in range(failures):
        record_outcome(link, False)
    if delivered:
        record_outcome(link, True)
    return HopOutcome(
        delivered=delivered,
        attempts=attempts,
        elapsed=attempts * attempt_slot(params, packet_bits),
    )


def charge(node: NodeState, bits: int, direction: str, model: EnergyModel) -> NodeState:
    """Debit the radio energy of ``bits`` in the given direction.

    Residual energy clamps at zero, at which point the node is dead.
    """
    per_bit = model.tx_per_bit if direction == TX else model.rx_per_bit
    node.energy_residual -= bits * per_bit
    if node.energy_residual <= 0.0:
        node.energy_residual = 0.0
        node.alive = False
    return node
