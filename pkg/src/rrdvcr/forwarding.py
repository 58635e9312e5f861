"""Forwarding metric: progress speeds, dynamic weighting, candidate selection.

A packet needs to sustain ``required_speed`` hops per second to meet its
deadline.  Every (relay, target) pair in the two-hop forwarder set offers a
speed — hop progress over the summed expected media latencies — and pairs at
or above the requirement form the candidate set.  Candidates are scored by
three normalized shares: offered speed, link reliability, and the target's
residual-energy fraction.  Speed and reliability carry a common weight
``f`` that adapts per packet to its remaining deadline slack, so urgent and
relaxed packets are serviced differently; the energy share carries ``1-f``.

A THVR-style variant scores speed against the relay's energy with a fixed
weight ``beta`` and no reliability term, for baseline comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .link_quality import LinkStats, mtx
from .neighbor import NeighborTables, two_hop_forwarders

FORWARD = "forward"
FALLBACK = "fallback"
DROP = "drop"

DROP_DEADLINE = "deadline"
DROP_NO_ROUTE = "no_route"


class NoCandidateError(ValueError):
    """Raised when a metric is evaluated over an empty candidate set."""


@dataclass(frozen=True)
class Decision:
    kind: str  # FORWARD, FALLBACK, or DROP
    relay: int | None = None
    target: int | None = None
    reason: str | None = None


@dataclass
class MetricConfig:
    """Knobs of the scoring metric and the selection constraints."""

    mtx_term_mode: str = "reliability"  # or "literal"
    f_mode: str = "paper"  # "paper", "monotone", or "fixed"
    f_fixed: float = 0.5
    beta: float = 0.5
    reliability_gate: float = 0.5
    e_threshold: float = 0.5  # joules

    def __post_init__(self):
        if self.mtx_term_mode not in ("reliability", "literal"):
            raise ValueError(f"unknown mtx_term_mode {self.mtx_term_mode!r}")
        if self.f_mode not in ("paper", "monotone", "fixed"):
            raise ValueError(f"unknown f_mode {self.f_mode!r}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must be in [0, 1]")
        if not 0.0 <= self.reliability_gate <= 1.0:
            raise ValueError("reliability_gate must be in [0, 1]")


@dataclass(frozen=True)
class DeadlineState:
    """Deadline bookkeeping for one packet at one decision point."""

    d_req: float
    rt: float
    h_i: int
    h_s: int


@dataclass
class Candidate:
    """One admissible (relay, target) pair with its scoring inputs."""

    j: int
    k: int
    speed: float
    mtx_ij: float = 1.0
    mtx_jk: float = 1.0
    energy_frac: float = 1.0
    score: float = 0.0


def required_speed(n_hops: int, d_req: float) -> float:
    """Hop progress per second needed to cover ``n_hops`` within ``d_req``."""
    if d_req <= 0:
        raise ValueError("d_req must be positive")
    return n_hops / d_req


def two_hop_speed(h_i: int, h_k: int, ed_ij: float, ed_jk: float) -> float:
    """Hop progress per second offered by relaying through (j, k)."""
    total = ed_ij + ed_jk
    if total <= 0:
        raise ValueError("total expected delay must be positive")
    return (h_i - h_k) / total


def f_rt(
    rt: float,
    d_req: float,
    h_i: int,
    h_s: int,
    f_mode: str = "paper",
    f_fixed: float = 0.5,
) -> float:
    """Deadline-adaptive weight on the speed and reliability terms.

    ``paper`` mode compares the remaining-time fraction rt/d_req with the
    remaining-hop fraction h_i/h_s: at or below it the weight is rt/d_req,
    above it 1 - rt/d_req.  ``monotone`` mode is 1 - rt/d_req throughout
    (strictly inverse in remaining time).  ``fixed`` pins the weight.
    """
    if f_mode == "fixed":
        return f_fixed
    if h_s <= 0:
        raise ValueError("source height must be positive")
    if not 0.0 <= rt <= d_req:
        raise ValueError("rt must lie in [0, d_req]")
    ratio = rt / d_req
    if f_mode == "monotone":
        return 1.0 - ratio
    if ratio <= h_i / h_s:
        return ratio
    return 1.0 - ratio


def thvr_metric(candidates: list[Candidate], beta: float) -> list[Candidate]:
    """Score candidates by normalized speed and relay-energy shares.

    Shares are normalized over the candidate set, so scores sum to 1.
    """
    if not candidates:
        raise NoCandidateError("empty candidate set")
    speed_sum = sum(c.speed for c in candidates)
    energy_sum = sum(c.energy_frac for c in candidates)
    for c in candidates:
        s = beta * c.speed / speed_sum if speed_sum > 0 else 0.0
        e = (1.0 - beta) * c.energy_frac / energy_sum if energy_sum > 0 else 0.0
        c.score = s + e
    return candidates


def rrdvcr_metric(
    candidates: list[Candidate],
    f: float,
    mtx_term_mode: str = "reliability",
) -> list[Candidate]:
    """Score candidates by speed, reliability, and target-energy shares.

    The speed and reliability terms are weighted ``f`` each and the energy
    term ``1 - f``, so scores sum to 1 + f (each share itself sums to 1).
    In the default ``reliability`` mode the reliability share is the inverse
    of the relay-to-target transmission count, normalized over the set; the
    ``literal`` mode keeps the raw transmission counts (first-hop count over
    the summed second-hop counts), which rewards costly links and exists for
    comparison only.
    """
    if not candidates:
        raise NoCandidateError("empty candidate set")
    speed_sum = sum(c.speed for c in candidates)
    energy_sum = sum(c.energy_frac for c in candidates)
    if mtx_term_mode == "reliability":
        rel_num = [1.0 / c.mtx_jk for c in candidates]
        rel_den = sum(rel_num)
    else:
        rel_num = [c.mtx_ij for c in candidates]
        rel_den = sum(c.mtx_jk for c in candidates)
    for c, rn in zip(candidates, rel_num):
        term_s = f * c.speed / speed_sum if speed_sum > 0 else 0.0
        term_r = f * rn / rel_den if rel_den > 0 else 0.0
        term_e = (1.0 - f) * c.energy_frac / energy_sum if energy_sum > 0 else 0.0
        c.score = term_s + term_r + term_e
    return candidates


def select_forwarder(
    i: int,
    packet,
    now: float,
    tables: NeighborTables,
    heights: dict[int, int | None],
    link_stats: dict[tuple[int, int], LinkStats],
    energies: dict[int, tuple[float, float]],
    config: MetricConfig,
) -> Decision:
    """Pick the next (relay, target) pair for ``packet`` at node ``i``.

    Two-hop forwarder pairs are admitted when their offered speed meets the
    speed required by the packet's remaining time and current height, both
    hops pass the reliability gate, and the target's residual energy is at
    least the threshold.  The admitted pair with the highest metric score
    wins (ties to the lowest (relay, target) ids).  With no admissible pair,
    the packet falls back to the height-nearer neighbor with the most
    residual energy above threshold (energy ties to the better link, then
    the lower id), and is dropped only if none exists.

    ``packet`` must expose ``created``, ``d_req``, and ``h_s`` (its source's
    height when generated); ``energies`` maps node id to (residual, initial).
    """
    rt = packet.d_req - (now - packet.created)
    if rt <= 0:
        return Decision(DROP, reason=DROP_DEADLINE)
    h_i = heights.get(i)
    if h_i is None or h_i <= 0:
        return Decision(DROP, reason=DROP_NO_ROUTE)

    state = DeadlineState(d_req=packet.d_req, rt=rt, h_i=h_i, h_s=packet.h_s)
    # a packet's speed requirement is fixed at its source; urgency along the
    # way shifts the metric weight, not the admission bar
    req = required_speed(packet.h_s, packet.d_req)
    candidates = []
    for j, k in sorted(two_hop_forwarders(tables, heights)):
        ls_ij = link_stats[(i, j)]
        ls_jk = link_stats[(j, k)]
        speed = two_hop_speed(h_i, heights[k], ls_ij.ed, ls_jk.ed)
        if speed < req:
            continue
        if ls_ij.cur_psucc < config.reliability_gate:
            continue
        if ls_jk.cur_psucc < config.reliability_gate:
            continue
        res_k, init_k = energies[k]
        if res_k < config.e_threshold:
            continue
        candidates.append(
            Candidate(
                j=j,
                k=k,
                speed=speed,
                mtx_ij=ls_ij.mtx,
                mtx_jk=ls_jk.mtx,
                energy_frac=res_k / init_k,
            )
        )

    if candidates:
        f = f_rt(state.rt, state.d_req, state.h_i, state.h_s,
                 config.f_mode, config.f_fixed)
        rrdvcr_metric(candidates, f, config.mtx_term_mode)
        best = candidates[0]
        for c in candidates[1:]:
            if c.score > best.score:
                best = c
        return Decision(FORWARD, relay=best.j, target=best.k)

    fallback = None
    fallback_key = None
    for j in sorted(tables.n1):
        h_j = heights.get(j)
        if h_j is None or h_j >= h_i:
            continue
        if energies[j][0] < config.e_threshold:
            continue
        key = (energies[j][0], link_stats[(i, j)].cur_psucc, -j)
        if fallback_key is None or key > fallback_key:
            fallback, fallback_key = j, key
    if fallback is not None:
        return Decision(FALLBACK, relay=fallback)
    return Decision(DROP, reason=DROP_NO_ROUTE)
