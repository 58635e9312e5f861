"""Two-hop neighbor tables, relay cover selection, and forwarder sets.

Each node learns its one-hop set from HELLO exchange and its two-hop set
from the neighbor lists its neighbors report back.  Since relaying through
every one-hop neighbor is redundant, a small subset of one-hop neighbors (the
cover) is chosen greedily so that every two-hop neighbor stays reachable
through at least one chosen relay.  Forwarder sets then restrict candidates
to relays and targets that make strict hop progress toward the sink.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .topology import Topology


@dataclass
class NeighborTables:
    """Node ``owner``'s view of its two-hop neighborhood.

    ``relay[j]`` holds every node reachable in one hop from one-hop neighbor
    ``j`` (excluding ``owner`` and ``j``); ``cover`` maps each selected relay
    to the two-hop neighbors it is responsible for.
    """

    owner: int
    n1: set[int] = field(default_factory=set)
    n2: set[int] = field(default_factory=set)
    relay: dict[int, frozenset[int]] = field(default_factory=dict)
    cover: dict[int, frozenset[int]] = field(default_factory=dict)


def collect_two_hop(topology: Topology, i: int) -> NeighborTables:
    """Build the one-hop/two-hop tables of node ``i`` from HELLO rounds.

    A node at both one and two hops is classified as one-hop, so n1 and n2
    are disjoint.
    """
    n1 = set(topology.adjacency[i])
    relay = {
        j: frozenset(k for k in topology.adjacency[j] if k != i and k != j)
        for j in n1
    }
    n2 = set().union(*relay.values()) - n1 if relay else set()
    return NeighborTables(owner=i, n1=n1, n2=n2, relay=relay)


def select_cover(
    tables: NeighborTables,
    energies: dict[int, float],
    delays: dict[int, float],
) -> dict[int, frozenset[int]]:
    """Greedy minimal cover of the two-hop set by one-hop relays.

    Relays that are the sole route to some two-hop neighbor are mandatory.
    The rest are added greedily by how many still-uncovered two-hop nodes
    they reach; coverage ties prefer the relay with higher residual energy,
    then lower link delay, then lower id.  The result covers every coverable
    two-hop neighbor and is stored back on ``tables``.
    """
    coverage = {j: tables.relay[j] & tables.n2 for j in tables.n1}
    uncovered = set(tables.n2)
    chosen: dict[int, frozenset[int]] = {}

    coverer_count: dict[int, int] = {k: 0 for k in tables.n2}
    for j in tables.n1:
        for k in coverage[j]:
            coverer_count[k] += 1
    mandatory = {
        j for j in tables.n1 if any(coverer_count[k] == 1 for k in coverage[j])
    }
    for j in sorted(mandatory):
        chosen[j] = frozenset(coverage[j])
        uncovered -= coverage[j]

    remaining = set(tables.n1) - set(chosen)
    while uncovered:
        best = None
        best_key = None
        for j in remaining:
            gain = len(coverage[j] & uncovered)
            if gain == 0:
                continue
            key = (gain, energies.get(j, 0.0), -delays.get(j, 0.0), -j)
            if best_key is None or key > best_key:
                best, best_key = j, key
        if best is None:
            break
        chosen[best] = frozenset(coverage[best] & uncovered) | chosen.get(
            best, frozenset()
        )
        uncovered -= coverage[best]
        remaining.discard(best)

    tables.cover = chosen
    return chosen


def one_hop_forwarders(tables: NeighborTables, heights: dict[int, int | None]) -> set[int]:
    """One-hop neighbors strictly nearer the sink than the owner."""
    h_i = heights[tables.owner]
    if h_i is None:
        return set()
    return {
        j
        for j in tables.n1
        if heights.get(j) is not None and h_i - heights[j] > 0
    }


def two_hop_forwarders(
    tables: NeighborTables, heights: dict[int, int | None]
) -> set[tuple[int, int]]:
    """(relay, target) pairs making strict hop progress toward the sink.

    Relays range over the one-hop forwarders; targets over each relay's own
    neighbors.  Every two-hop target is necessarily covered by the relay
    cover, which prunes redundant HELLO relaying but does not shrink the
    forwarder set.
    """
    h_i = heights[tables.owner]
    if h_i is None:
        return set()
    pairs = set()
    for j in one_hop_forwarders(tables, heights):
        for k in tables.relay[j]:
            h_k = heights.get(k)
            if h_k is not None and h_i - h_k > 0:
                pairs.add((j, k))
    return pairs
