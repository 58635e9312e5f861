"""Node deployment, radio connectivity, and the sink-rooted hop gradient.

Deployments are drawn from a Poisson point process (or placed along a noisy
line for sparse multihop studies).  Connectivity is unit-disk on the radio
range; link *quality* is handled separately and may be asymmetric.  The hop
gradient ("height" of each node) is established by flooding advertisement
packets outward from the sink, which reduces to a breadth-first traversal of
the connectivity graph.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

DEFAULT_RADIO_RANGE = 40.0
DEFAULT_INITIAL_ENERGY = 5.0
_MAX_EMPTY_REDRAWS = 10


class TopologyError(ValueError):
    """Raised for degenerate deployment parameters or unknown nodes."""


@dataclass(frozen=True)
class Position:
    x: float
    y: float

    def distance_to(self, other: "Position") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass
class NodeState:
    """Per-node routing state: position, gradient height, energy, liveness.

    ``height`` is the hop count to the sink (``None`` until the gradient is
    built, or if the node cannot reach the sink).
    """

    id: int
    pos: Position
    height: int | None = None
    energy_residual: float = DEFAULT_INITIAL_ENERGY
    energy_initial: float = DEFAULT_INITIAL_ENERGY
    alive: bool = True
    failure_prob: float = 0.0


@dataclass(frozen=True)
class AdvPacket:
    """Sink-originated advertisement used to establish the hop gradient."""

    sink_id: int
    source_id: int
    residual_energy: float
    link_quality: float
    height_count: int

    def __post_init__(self):
        if self.height_count < 1:
            raise ValueError("in-flight ADV packets carry height_count >= 1")


@dataclass
class Topology:
    nodes: list[NodeState]
    radio_range: float
    adjacency: dict[int, list[int]]
    field_width: float = 0.0
    field_height: float = 0.0
    seed: int | None = None
    positions: np.ndarray = field(default=None, repr=False)  # (N, 2) float64

    def node(self, i: int) -> NodeState:
        return self.nodes[i]

    def __len__(self) -> int:
        return len(self.nodes)


def _build_adjacency(xy: np.ndarray, radio_range: float) -> dict[int, list[int]]:
    """Symmetric unit-disk adjacency; O(N^2) pairwise distances via numpy."""
    n = xy.shape[0]
    d2 = ((xy[:, None, :] - xy[None, :, :]) ** 2).sum(axis=2)
    within = d2 <= radio_range * radio_range
    np.fill_diagonal(within, False)
    return {i: [int(j) for j in np.nonzero(within[i])[0]] for i in range(n)}


def _topology_from_xy(xy, radio_range, field_w, field_h, seed, initial_energy):
    nodes = [
        NodeState(
            id=i,
            pos=Position(float(x), float(y)),
            energy_residual=initial_energy,
            energy_initial=initial_energy,
        )
        for i, (x, y) in enumerate(xy)
    ]
    return Topology(
        nodes=nodes,
        radio_range=radio_range,
        adjacency=_build_adjacency(xy, radio_range),
        field_width=field_w,
        field_height=field_h,
        seed=seed,
        positions=np.asarray(xy, dtype=np.float64),
    )


def deploy_poisson(
    field_width: float,
    field_height: float,
    density: float,
    rng_seed: int,
    radio_range: float = DEFAULT_RADIO_RANGE,
    initial_energy: float = DEFAULT_INITIAL_ENERGY,
) -> Topology:
    """Deploy nodes by a Poisson point process over a rectangular field.

    The node count is Poisson(density * area) and positions are i.i.d.
    uniform.  A draw of zero nodes is redrawn from the same stream a bounded
    number of times before raising.
    """
    if field_width <= 0 or field_height <= 0:
        raise TopologyError("field dimensions must be positive")
    if density <= 0:
        raise TopologyError("density must be positive")
    rng = np.random.default_rng(rng_seed)
    area = field_width * field_height
    n = 0
    for _ in range(_MAX_EMPTY_REDRAWS):
        n = int(rng.poisson(density * area))
        if n > 0:
            break
    if n == 0:
        raise TopologyError("drew zero nodes after %d retries" % _MAX_EMPTY_REDRAWS)
    xy = rng.uniform((0.0, 0.0), (field_width, field_height), size=(n, 2))
    return _topology_from_xy(
        xy, radio_range, field_width, field_height, rng_seed, initial_energy
    )


def deploy_line(
    n_nodes: int,
    rng_seed: int,
    spacing: float = 0.7 * DEFAULT_RADIO_RANGE,
    band: float = 0.8 * DEFAULT_RADIO_RANGE,
    radio_range: float = DEFAULT_RADIO_RANGE,
    initial_energy: float = DEFAULT_INITIAL_ENERGY,
) -> Topology:
    """Deploy a sparse, line-ish multihop strip of ``n_nodes`` nodes.

    Nodes advance along x by roughly ``spacing`` with lateral jitter inside a
    band, giving a connected strip with occasional parallel alternatives.
    Node 0 sits at the left end (conventional source), the last node at the
    right end (conventional sink).
    """
    if n_nodes < 2:
        raise TopologyError("line deployment needs at least 2 nodes")
    rng = np.random.default_rng(rng_seed)
    xs = np.arange(n_nodes) * spacing + rng.uniform(-0.15, 0.15, n_nodes) * spacing
    ys = band / 2.0 + rng.uniform(-0.5, 0.5, n_nodes) * band
    xs[0], ys[0] = 0.0, band / 2.0
    xs[-1], ys[-1] = (n_nodes - 1) * spacing, band / 2.0
    xy = np.stack([xs, ys], axis=1)
    return _topology_from_xy(
        xy, radio_range, float(xs.max()), band, rng_seed, initial_energy
    )


def radio_neighbors(topology: Topology, i: int) -> list[int]:
    """All nodes within radio range of node ``i`` (excluding ``i`` itself)."""
    try:
        return list(topology.adjacency[i])
    except KeyError:
        raise TopologyError(f"unknown node {i}") from None


def build_height_gradient(topology: Topology, sink: int) -> dict[int, int | None]:
    """Flood advertisements from the sink and return each node's height.

    The sink takes height 0 and broadcasts an advertisement carrying
    height_count 1; every node adopts the lowest height_count it hears and
    rebroadcasts with the count incremented.  First-reception flooding over
    unit delays is breadth-first search, so heights equal hop distances.
    Nodes the flood never reaches map to ``None``.
    """
    if sink not in topology.adjacency:
        raise TopologyError(f"unknown sink {sink}")
    heights: dict[int, int | None] = {n.id: None for n in topology.nodes}
    heights[sink] = 0
    sink_node = topology.node(sink)
    queue = deque(
        [
            AdvPacket(
                sink_id=sink,
                source_id=sink,
                residual_energy=sink_node.energy_residual,
                link_quality=1.0,
                height_count=1,
            )
        ]
    )
    while queue:
        adv = queue.popleft()
        for j in topology.adjacency[adv.source_id]:
            if heights[j] is not None:
                continue
            heights[j] = adv.height_count
            queue.append(
                AdvPacket(
                    sink_id=sink,
                    source_id=j,
                    residual_energy=topology.node(j).energy_residual,
                    link_quality=1.0,
                    height_count=adv.height_count + 1,
                )
            )
    return heights


def topology_to_json(topology: Topology) -> str:
    doc = {
        "field": [topology.field_width, topology.field_height],
        "radio_range": topology.radio_range,
        "seed": topology.seed,
        "nodes": [
            {
                "id": n.id,
                "x": n.pos.x,
                "y": n.pos.y,
                "energy": n.energy_initial,
            }
            for n in topology.nodes
        ],
    }
    return json.dumps(doc, sort_keys=True)


def topology_from_json(text: str) -> Topology:
    doc = json.loads(text)
    order = sorted(doc["nodes"], key=lambda d: d["id"])
    xy = np.array([[d["x"], d["y"]] for d in order], dtype=np.float64)
    topo = _topology_from_xy(
        xy,
        doc["radio_range"],
        doc["field"][0],
        doc["field"][1],
        doc["seed"],
        initial_energy=DEFAULT_INITIAL_ENERGY,
    )
    for node, d in zip(topo.nodes, order):
        node.energy_initial = d["energy"]
        node.energy_residual = d["energy"]
    return topo
