"""Deterministic discrete-event scenario engine.

One run wires a deployment, ground-truth link probabilities, neighbor
tables, and a protocol (rrdvcr, thvr, or speed) into a single event loop:
constant-rate packet generation, per-hop forwarding decisions, capped-retry
transmission attempts, periodic state refresh, and metric collection.

Engine-internal state lives in flat numpy arrays indexed by node, directed
link, and candidate pair, so the per-decision work is one kernel call (see
``kernels``).  The routing caches the protocols score against are refreshed
on the periodic tick, not per packet.  Energy is accounted in integer
picojoules, which makes the run's energy ledger exact.

RRDVCR routes on the hop gradient (virtual coordinates) with two-hop
candidate pairs restricted to the relay cover; the THVR-style baseline
scores two-hop *geographic* velocity against relay energy and refreshes its
tables with proactive per-tick beacons; the SPEED-style baseline greedily
picks the fastest one-hop geographic velocity.
"""

from __future__ import annotations

import heapq
import json
import math
from collections import deque
from dataclasses import dataclass, field
from types import SimpleNamespace

import numpy as np

from . import forwarding, kernels, link_quality, mac, neighbor, topology
from .config import ScenarioConfig

PJ = 1_000_000_000_000  # picojoules per joule

_PRIO_TICK = 0
_PRIO_GEN = 1
_PRIO_HOP = 2

DROP_DEADLINE = "deadline"
DROP_MAC = "mac_failure"
DROP_NO_ROUTE = "no_route"
DROP_LOOP = "loop"
DROP_UNREACHABLE = "unreachable_source"


class SimulationError(RuntimeError):
    """Internal consistency violation (bad decision, broken invariant)."""


@dataclass
class Packet:
    id: int
    source: int
    destination: int
    created: float
    d_req: float
    bits: int
    h_s: int
    req_speed: float = 0.0  # per-packet admission threshold, fixed at birth
    hops: list[int] = field(default_factory=list)
    attempts_total: int = 0
    energy_pj: int = 0


@dataclass
class Event:
    time: float
    kind: str
    node: int | None = None
    detail: dict = field(default_factory=dict)


@dataclass
class RunMetrics:
    protocol: str
    seed: int
    deadline_ms: float
    sources: int
    n_nodes: int = 0
    source_height: int = -1
    generated: int = 0
    delivered: int = 0
    delivered_on_time: int = 0
    dropped: int = 0
    pdmr: float = 0.0
    ecpp_j: float = 0.0
    mean_delay_s: float = 0.0
    worst_delay_s: float = 0.0
    mean_hops: float = 0.0
    hop_counts: dict[int, int] = field(default_factory=dict)
    control_packets: int = 0
    drop_reasons: dict[str, int] = field(default_factory=dict)
    data_energy_j: float = 0.0
    energy_used_j: float = 0.0
    energy_used_pj: int = 0
    energy_charged_pj: int = 0
    disconnected: bool = False
    backend: str = ""

    @property
    def ecpp_mj(self) -> float:
        return self.ecpp_j * 1e3

    def to_json(self) -> str:
        doc = dict(self.__dict__)
        doc.pop("trace", None)
        doc["hop_counts"] = {str(k): v for k, v in sorted(self.hop_counts.items())}
        return json.dumps(doc, sort_keys=True)


def inject_failures(failure_probs: np.ndarray, protected: set[int]) -> list[int]:
    """Mark nodes whose failure probability exceeds the 0.5 tolerance.

    Returns the ids of nodes that die.  Protected nodes (source, sink) never
    fail this way.
    """
    dead = [
        int(i)
        for i in np.nonzero(failure_probs > 0.5)[0]
        if int(i) not in protected
    ]
    return dead


class _Run:
    """All mutable state of one scenario execution."""

    def __init__(self, config: ScenarioConfig, protocol, deadline_ms, n_sources,
                 seed, backend, collect_trace):
        self.cfg = config
        self.protocol = protocol
        self.deadline_s = deadline_ms / 1000.0
        self.deadline_ms = deadline_ms
        self.n_sources = n_sources
        self.seed = seed
        self.kern = kernels.get_kernels(backend)
        self.trace: list[Event] | None = [] if collect_trace else None
        self.charged_pj = 0
        self.control = 0
        self._seq = 0
        self._heap: list = []
        self._setup()

    # ------------------------------------------------------------------
    # setup
    # ------------------------------------------------------------------

    def _setup(self):
        cfg = self.cfg
        streams = np.random.SeedSequence(self.seed).spawn(5)
        self.rng_link = np.random.default_rng(streams[0])
        self.rng_mac = np.random.default_rng(streams[1])
        self.rng_fail = np.random.default_rng(streams[2])
        self.rng_src = np.random.default_rng(streams[3])
        self.rng_charge = np.random.default_rng(streams[4])

        if cfg.topology == "line":
            topo = topology.deploy_line(
                cfg.line_nodes, self.seed, radio_range=cfg.radio_range,
                initial_energy=cfg.initial_energy_j,
            )
            sink_anchor = (topo.field_width, topo.field_height / 2.0)
            source_anchor = (0.0, topo.field_height / 2.0)
        else:
            topo = topology.deploy_poisson(
                cfg.field_width, cfg.field_height, cfg.density, self.seed,
                radio_range=cfg.radio_range, initial_energy=cfg.initial_energy_j,
            )
            sink_anchor = cfg.sink_anchor
            source_anchor = cfg.source_anchor
        self.topo = topo
        self.n = len(topo)
        xy = topo.positions

        self.sink = int(np.argmin(((xy - np.asarray(sink_anchor)) ** 2).sum(axis=1)))
        self.sources = self._place_sources(xy, source_anchor)

        self.gd = np.sqrt(((xy - xy[self.sink]) ** 2).sum(axis=1))
        self.alive = np.ones(self.n, dtype=bool)
        self.init_pj = np.full(
            self.n, int(round(cfg.initial_energy_j * PJ)), dtype=np.int64
        )
        charge = self.rng_charge.uniform(
            cfg.initial_charge_min, cfg.initial_charge_max, self.n
        )
        self.used_pj = (self.init_pj * (1.0 - charge)).astype(np.int64)
        self._used_pj_at_start = self.used_pj.copy()

        # adjacency in CSR form, neighbor lists sorted by id
        ptr = np.zeros(self.n + 1, dtype=np.int64)
        flat = []
        for i in range(self.n):
            nbrs = topo.adjacency[i]
            ptr[i + 1] = ptr[i] + len(nbrs)
            flat.extend(nbrs)
        self.nbr_ptr = ptr
        self.nbr = np.asarray(flat, dtype=np.int32)
        self.n_links = len(flat)
        self.lid = {}
        for i in range(self.n):
            for pos in range(ptr[i], ptr[i + 1]):
                self.lid[(i, int(self.nbr[pos]))] = pos

        self._init_links(xy)
        self._apply_failures()
        self._rebuild(initial=True)
        self._init_traffic()
        self._schedule_ticks()
        self._refresh_caches()

        self.metrics = RunMetrics(
            protocol=self.protocol,
            seed=self.seed,
            deadline_ms=self.deadline_ms,
            sources=self.n_sources,
            n_nodes=self.n,
            backend=self.kern.name,
        )
        self.metrics.source_height = int(self.heights[self.sources[0]])
        self.metrics.disconnected = any(
            self.heights[s] < 0 for s in self.sources
        )
        self._delays = []
        self._hop_lengths = []
        self._data_energy_pj = 0

    def _place_sources(self, xy, source_anchor):
        if self.n_sources == 1:
            dist = ((xy - np.asarray(source_anchor)) ** 2).sum(axis=1)
            dist[self.sink] = np.inf
            return [int(np.argmin(dist))]
        # multi-source: uniform picks from the left quarter of the field
        eligible = [
            i
            for i in range(self.n)
            if i != self.sink and xy[i, 0] <= self.topo.field_width / 4.0
        ]
        if len(eligible) < self.n_sources:
            eligible = [i for i in range(self.n) if i != self.sink]
        picks = self.rng_src.choice(
            np.asarray(eligible), size=self.n_sources, replace=False
        )
        return sorted(int(i) for i in picks)

    def _init_links(self, xy):
        cfg = self.cfg
        src = np.repeat(np.arange(self.n), np.diff(self.nbr_ptr))
        dst = self.nbr.astype(np.int64)
        dist = np.sqrt(((xy[src] - xy[dst]) ** 2).sum(axis=1))
        df = link_quality.link_delivery_prob(
            dist, cfg.radio_range, cfg.link_exponent, cfg.link_floor
        )
        rev = np.array(
            [self.lid[(int(d), int(s))] for s, d in zip(src, dst)], dtype=np.int64
        )
        self.p_true = np.clip(df * df[rev], 0.0, 1.0)
        congestion = max(0.0, 1.0 - cfg.congestion_penalty * (self.n_sources - 1))
        self.p_eff = np.clip(self.p_true * congestion, 0.0, 1.0)
        # gradient and neighbor tables live on the usable-link subgraph; the
        # ADV flood carries link quality, so hopeless floor-probability links
        # never define a height level
        self.link_ok = self.p_true >= cfg.metric.reliability_gate

        # initial media-delay estimates by candidate rank among the node's
        # sink-ward neighbors (nearer the sink first; non-forward links all
        # rank behind them), refined by the running EWMA once links get used
        self.ed = np.empty(self.n_links)
        for i in range(self.n):
            lo, hi = self.nbr_ptr[i], self.nbr_ptr[i + 1]
            fwd = sorted(
                (p for p in range(lo, hi) if self.gd[self.nbr[p]] < self.gd[i]),
                key=lambda p: (self.gd[self.nbr[p]], self.nbr[p]),
            )
            ranks = {pos: r for r, pos in enumerate(fwd)}
            for pos in range(lo, hi):
                rank = ranks.get(pos, len(fwd))
                self.ed[pos] = mac.estimate_ed(cfg.media, cfg.packet_bits, rank)

        w = cfg.window_size
        n_succ = np.rint(self.p_eff * w).astype(np.int64)
        self.win = (np.arange(w)[None, :] < n_succ[:, None]).astype(np.uint8)
        self.whead = np.zeros(self.n_links, dtype=np.int64)
        self.wcount = np.full(self.n_links, w, dtype=np.int64)
        self.wsucc = n_succ.copy()

        self.slot = mac.attempt_slot(cfg.media, cfg.packet_bits)
        em = cfg.energy
        self.tx_pj = int(round(em.tx_per_bit * PJ))
        self.rx_pj = int(round(em.rx_per_bit * PJ))
        self.ack_bits = em.ack_bits(cfg.media)
        self.ctrl_bits = em.control_packet_bits
        self.eth_pj = int(round(self.cfg.metric.e_threshold * PJ))

    def _apply_failures(self):
        cfg = self.cfg
        probs = self.rng_fail.uniform(0.0, cfg.failure_prob_max, self.n)
        protected = set(self.sources) | {self.sink}
        for node_id in protected:
            probs[node_id] = 0.0
        self.failure_probs = probs
        for node_id in inject_failures(probs, protected):
            self.alive[node_id] = False

    # ------------------------------------------------------------------
    # gradient, tables, candidate-pair structures
    # ------------------------------------------------------------------

    def _alive_adjacency(self, reliable=False):
        adj = {}
        for i in range(self.n):
            if not self.alive[i]:
                continue
            lo, hi = int(self.nbr_ptr[i]), int(self.nbr_ptr[i + 1])
            adj[i] = [
                int(self.nbr[pos])
                for pos in range(lo, hi)
                if self.alive[self.nbr[pos]]
                and (not reliable or self.link_ok[pos])
            ]
        return adj

    def _bfs_heights(self, adj_alive):
        heights = np.full(self.n, -1, dtype=np.int32)
        heights[self.sink] = 0
        queue = deque([self.sink])
        while queue:
            i = queue.popleft()
            for j in adj_alive.get(i, ()):
                if heights[j] < 0:
                    heights[j] = heights[i] + 1
                    queue.append(j)
        return heights

    def _derive_connectivity(self):
        adj_full = self._alive_adjacency()
        self.heights = self._bfs_heights(self._alive_adjacency(reliable=True))
        self._alive_deg = np.array(
            [len(adj_full.get(i, ())) if self.alive[i] else 0 for i in range(self.n)],
            dtype=np.int64,
        )
        return adj_full

    def _rebuild(self, t=0.0, initial=False):
        """(Re)build heights, neighbor tables, and per-protocol pair arrays."""
        adj_full = self._derive_connectivity()

        # ADV flood plus the two HELLO rounds of the table bootstrap; later
        # refreshes ride on beacons (thvr/speed) or acks (rrdvcr), so only
        # rrdvcr pays the flood again on rebuilds
        if initial or self.protocol == "rrdvcr":
            self.control += int((self.heights >= 0).sum()) + 2 * int(self.alive.sum())
            if self._charge_broadcast_round(t, 3):
                adj_full = self._derive_connectivity()

        if self.protocol == "rrdvcr":
            self._build_rrdvcr_pairs(self._alive_adjacency(reliable=True))
        elif self.protocol == "thvr":
            self._build_thvr_pairs(adj_full)
        else:
            self._build_speed_candidates(adj_full)

    def _build_rrdvcr_pairs(self, adj_alive):
        shim = SimpleNamespace(adjacency=adj_alive)
        residual = (self.init_pj - self.used_pj) / PJ
        ptr = np.zeros(self.n + 1, dtype=np.int64)
        pj_, pk_, lij, ljk, prog = [], [], [], [], []
        self.tables = {}
        for i in range(self.n):
            ptr[i + 1] = ptr[i]
            if not self.alive[i] or i == self.sink or self.heights[i] <= 0:
                continue
            tables = neighbor.collect_two_hop(shim, i)
            energies = {j: residual[j] for j in tables.n1}
            delays = {j: self.ed[self.lid[(i, j)]] for j in tables.n1}
            neighbor.select_cover(tables, energies, delays)
            self.tables[i] = tables
            h_i = int(self.heights[i])
            for j in sorted(tables.n1):
                if self.heights[j] < 0 or self.heights[j] >= h_i:
                    continue
                for k in sorted(tables.relay[j]):
                    h_k = int(self.heights[k])
                    if h_k < 0 or h_i - h_k <= 0:
                        continue
                    pj_.append(j)
                    pk_.append(k)
                    lij.append(self.lid[(i, j)])
                    ljk.append(self.lid[(j, k)])
                    prog.append(h_i - h_k)
                    ptr[i + 1] += 1
        self.pptr = ptr
        self.pj = np.asarray(pj_, dtype=np.int32)
        self.pk = np.asarray(pk_, dtype=np.int32)
        self.plij = np.asarray(lij, dtype=np.int64)
        self.pljk = np.asarray(ljk, dtype=np.int64)
        self.pprog = np.asarray(prog, dtype=np.float64)

    def _build_thvr_pairs(self, adj_alive):
        ptr = np.zeros(self.n + 1, dtype=np.int64)
        tj, tk, lij, ljk, prog = [], [], [], [], []
        for i in range(self.n):
            ptr[i + 1] = ptr[i]
            if not self.alive[i] or i == self.sink:
                continue
            gd_i = self.gd[i]
            for j in adj_alive.get(i, ()):
                if self.gd[j] >= gd_i:
                    continue
                if j == self.sink:
                    tj.append(j)
                    tk.append(j)
                    lij.append(self.lid[(i, j)])
                    ljk.append(-1)
                    prog.append(gd_i)
                    ptr[i + 1] += 1
                    continue
                for k in adj_alive.get(j, ()):
                    if k == i or self.gd[k] >= gd_i:
                        continue
                    tj.append(j)
                    tk.append(k)
                    lij.append(self.lid[(i, j)])
                    ljk.append(self.lid[(j, k)])
                    prog.append(gd_i - self.gd[k])
                    ptr[i + 1] += 1
        self.tptr = ptr
        self.tj = np.asarray(tj, dtype=np.int32)
        self.tk = np.asarray(tk, dtype=np.int32)
        self.tlij = np.asarray(lij, dtype=np.int64)
        self.tljk = np.asarray(ljk, dtype=np.int64)
        self.tprog = np.asarray(prog, dtype=np.float64)

    def _build_speed_candidates(self, adj_alive):
        ptr = np.zeros(self.n + 1, dtype=np.int64)
        sj, lij, prog = [], [], []
        for i in range(self.n):
            ptr[i + 1] = ptr[i]
            if not self.alive[i] or i == self.sink:
                continue
            for j in adj_alive.get(i, ()):
                if self.gd[j] >= self.gd[i]:
                    continue
                sj.append(j)
                lij.append(self.lid[(i, j)])
                prog.append(self.gd[i] - self.gd[j])
                ptr[i + 1] += 1
        self.sptr = ptr
        self.sj = np.asarray(sj, dtype=np.int32)
        self.slij = np.asarray(lij, dtype=np.int64)
        self.sprog = np.asarray(prog, dtype=np.float64)

    # ------------------------------------------------------------------
    # periodic refresh
    # ------------------------------------------------------------------

    def _refresh_caches(self):
        """Recompute the scoring caches from the live link statistics."""
        m = float(self.cfg.max_retry)
        ps = self.wsucc / np.maximum(self.wcount, 1)
        with np.errstate(divide="ignore"):
            inv = np.where(ps > 0.0, 1.0 / np.maximum(ps, 1e-300), np.inf)
        self.ps_c = ps
        self.mtx_c = np.where(ps >= 1.0 / m, inv, m)
        self.ed_c = self.ed.copy()
        residual = self.init_pj - self.used_pj
        efrac = residual / self.init_pj
        self.eres_pj = residual

        if self.protocol == "rrdvcr":
            edsum = self.ed_c[self.plij] + self.ed_c[self.pljk]
            self.pspeed = self.pprog / edsum
            self.ppsij = self.ps_c[self.plij]
            self.ppsjk = self.ps_c[self.pljk]
            self.perk = residual[self.pk].astype(np.float64)
            self.pefk = efrac[self.pk]
            if self.cfg.metric.mtx_term_mode == "reliability":
                self.prelnum = 1.0 / self.mtx_c[self.pljk]
                self.prelden = self.prelnum
            else:
                self.prelnum = self.mtx_c[self.plij]
                self.prelden = self.mtx_c[self.pljk]
        elif self.protocol == "thvr":
            ed_jk = np.zeros(len(self.tljk))
            mask = self.tljk >= 0
            ed_jk[mask] = self.ed_c[self.tljk[mask]]
            self.tspeed = self.tprog / (self.ed_c[self.tlij] + ed_jk)
            self.tefj = efrac[self.tj]
        else:
            self.svel = self.sprog / self.ed_c[self.slij]

    def _update_tick(self, t):
        """Per-tick maintenance: proactive beacons, deaths, cache refresh."""
        if self.protocol in ("thvr", "speed"):
            self.control += int(self.alive.sum())
            if self._charge_broadcast_round(t, 1):
                self._rebuild(t)
        self._refresh_caches()
        self._trace(Event(t, "tick", None, {"control": self.control}))

    def _charge_broadcast_round(self, t, n_messages) -> bool:
        """Charge every alive node for broadcasting control packets.

        Each message costs a transmit at the broadcaster and a receive at
        every alive neighbor.  Returns True if any node died of the debit.
        """
        debit = np.where(
            self.alive,
            n_messages * self.ctrl_bits * (self.tx_pj + self.rx_pj * self._alive_deg),
            0,
        ).astype(np.int64)
        actual = np.minimum(debit, self.init_pj - self.used_pj)
        self.used_pj += actual
        self.charged_pj += int(actual.sum())
        newly_dead = self.alive & (self.used_pj >= self.init_pj)
        newly_dead[self.sink] = False
        if not newly_dead.any():
            return False
        self.alive[newly_dead] = False
        for node_id in np.nonzero(newly_dead)[0]:
            self._trace(Event(t, "node_fail", int(node_id), {"cause": "energy"}))
        return True

    def _charge_node_pj(self, t, node_id, pj_amount) -> int:
        cap = int(self.init_pj[node_id] - self.used_pj[node_id])
        actual = min(pj_amount, cap)
        self.used_pj[node_id] += actual
        self.charged_pj += actual
        if (
            self.used_pj[node_id] >= self.init_pj[node_id]
            and node_id != self.sink
            and self.alive[node_id]
        ):
            self.alive[node_id] = False
            self._trace(Event(t, "node_fail", int(node_id), {"cause": "energy"}))
            self._rebuild(t)
            self._refresh_caches()
        return actual

    # ------------------------------------------------------------------
    # traffic and event queue
    # ------------------------------------------------------------------

    def _init_traffic(self):
        cfg = self.cfg
        self._next_packet_id = 0
        for src in self.sources:
            t = 0.0
            while t < cfg.sim_seconds:
                self._push(t, _PRIO_GEN, ("gen", src))
                t += cfg.packet_interval_s

    def _schedule_ticks(self):
        t = self.cfg.tick_seconds
        while t < self.cfg.sim_seconds:
            self._push(t, _PRIO_TICK, ("tick", None))
            t += self.cfg.tick_seconds

    def _push(self, t, prio, payload):
        heapq.heappush(self._heap, (t, prio, self._seq, payload))
        self._seq += 1

    def _trace(self, event: Event):
        if self.trace is not None:
            self.trace.append(event)

    # ------------------------------------------------------------------
    # decisions
    # ------------------------------------------------------------------

    def _decide_rrdvcr(self, i, rt, h_i, pkt):
        cfg = self.cfg
        lo, hi = int(self.pptr[i]), int(self.pptr[i + 1])
        req = pkt.req_speed
        fw = forwarding.f_rt(
            rt, pkt.d_req, h_i, pkt.h_s, cfg.metric.f_mode, cfg.metric.f_fixed
        )
        idx = -1
        if hi > lo:
            idx = self.kern.select_rrdvcr(
                lo, hi, self.pspeed, self.ppsij, self.ppsjk, self.perk,
                self.pefk, self.prelnum, self.prelden,
                req, fw, cfg.metric.reliability_gate, float(self.eth_pj),
            )
        if idx >= 0:
            if cfg.validate_decisions:
                if not (
                    self.pspeed[idx] >= req
                    and self.ppsij[idx] >= cfg.metric.reliability_gate
                    and self.ppsjk[idx] >= cfg.metric.reliability_gate
                    and self.perk[idx] >= self.eth_pj
                ):
                    raise SimulationError("selected pair violates a constraint")
            return int(self.pj[idx]), int(self.plij[idx]), "forward"
        # fallback: height-nearer neighbor with the most residual energy
        # (energy ties go to the better link, then the lower id)
        lo, hi = int(self.nbr_ptr[i]), int(self.nbr_ptr[i + 1])
        nbrs = self.nbr[lo:hi]
        ok = (
            self.alive[nbrs]
            & self.link_ok[lo:hi]
            & (self.heights[nbrs] >= 0)
            & (self.heights[nbrs] < h_i)
            & (self.eres_pj[nbrs] >= self.eth_pj)
        )
        if not ok.any():
            return None, None, DROP_NO_ROUTE
        pos = np.arange(lo, hi)[ok]
        order = np.lexsort(
            (self.nbr[pos], -self.ps_c[pos], -self.eres_pj[nbrs[ok]])
        )
        best = int(pos[order[0]])
        return int(self.nbr[best]), best, "fallback"

    def _decide_thvr(self, i, pkt):
        lo, hi = int(self.tptr[i]), int(self.tptr[i + 1])
        if hi <= lo:
            return None, None, DROP_NO_ROUTE
        idx = self.kern.select_thvr(
            lo, hi, self.tspeed, self.tefj, pkt.req_speed, self.cfg.metric.beta
        )
        if idx < 0:
            return None, None, DROP_NO_ROUTE
        return int(self.tj[idx]), int(self.tlij[idx]), "forward"

    def _decide_speed(self, i, pkt):
        lo, hi = int(self.sptr[i]), int(self.sptr[i + 1])
        if hi <= lo:
            return None, None, DROP_NO_ROUTE
        idx = self.kern.select_speed(lo, hi, self.svel, pkt.req_speed)
        if idx < 0:
            return None, None, DROP_NO_ROUTE
        return int(self.sj[idx]), int(self.slij[idx]), "forward"

    # ------------------------------------------------------------------
    # per-packet handling
    # ------------------------------------------------------------------

    def _handle_gen(self, t, src):
        self.metrics.generated += 1
        # the packet's required progress speed is set once at the source
        # (hop gradient for rrdvcr, geographic for the baselines); urgency
        # along the way is the metric's business, not the admission's
        if self.deadline_s > 0:
            if self.protocol == "rrdvcr":
                need = max(int(self.heights[src]), 0) / self.deadline_s
            else:
                need = self.gd[src] / self.deadline_s
        else:
            need = math.inf
        pkt = Packet(
            id=self._next_packet_id,
            source=src,
            destination=self.sink,
            created=t,
            d_req=self.deadline_s,
            bits=self.cfg.packet_bits,
            h_s=int(self.heights[src]),
            req_speed=need,
            hops=[src],
        )
        self._next_packet_id += 1
        self._trace(Event(t, "gen", src, {"packet": pkt.id}))
        needs_gradient = self.protocol == "rrdvcr"
        if not self.alive[src] or (needs_gradient and self.heights[src] < 0):
            self._drop(pkt, t, DROP_UNREACHABLE, src)
            return
        self._handle_hop(t, pkt, src)

    def _handle_hop(self, t, pkt, i):
        if i == self.sink:
            self._deliver(t, pkt)
            return
        rt = pkt.d_req - (t - pkt.created)
        if rt <= 0:
            self._drop(pkt, t, DROP_DEADLINE, i)
            return
        if not self.alive[i]:
            self._drop(pkt, t, DROP_NO_ROUTE, i)
            return

        if self.protocol == "rrdvcr":
            h_i = int(self.heights[i])
            if h_i <= 0:
                self._drop(pkt, t, DROP_NO_ROUTE, i)
                return
            j, lid, kind = self._decide_rrdvcr(i, rt, h_i, pkt)
        elif self.protocol == "thvr":
            j, lid, kind = self._decide_thvr(i, pkt)
        else:
            j, lid, kind = self._decide_speed(i, pkt)

        if j is None:
            self._drop(pkt, t, kind, i)
            return
        if j in pkt.hops:
            self._drop(pkt, t, DROP_LOOP, i)
            return

        attempts, delivered = mac.draw_attempts(
            self.rng_mac.random(), float(self.p_eff[lid]), self.cfg.max_retry
        )
        elapsed = attempts * self.slot
        pkt.attempts_total += attempts

        n_fail = attempts - 1 if delivered else attempts
        self.kern.record_window(
            self.win, self.whead, self.wcount, self.wsucc,
            self.cfg.window_size, lid, n_fail, 1 if delivered else 0,
        )
        alpha = self.cfg.ed_smoothing
        self.ed[lid] = (1.0 - alpha) * self.ed[lid] + alpha * elapsed

        cost = attempts * pkt.bits * self.tx_pj
        spent = self._charge_node_pj(t, i, cost)
        if delivered:
            rx_cost = pkt.bits * self.rx_pj + self.ack_bits * self.tx_pj
            spent += self._charge_node_pj(t, j, rx_cost)
            spent += self._charge_node_pj(t, i, self.ack_bits * self.rx_pj)
        pkt.energy_pj += spent
        self._data_energy_pj += spent

        self._trace(
            Event(t, "hop", i, {
                "packet": pkt.id, "to": j, "kind": kind,
                "attempts": attempts, "ok": delivered,
            })
        )
        if delivered:
            pkt.hops.append(j)
            self._push(t + elapsed, _PRIO_HOP, ("hop", (pkt, j)))
        else:
            self._drop(pkt, t + elapsed, DROP_MAC, i)

    def _deliver(self, t, pkt):
        delay = t - pkt.created
        self.metrics.delivered += 1
        self._delays.append(delay)
        self._hop_lengths.append(len(pkt.hops) - 1)
        if delay <= pkt.d_req:
            self.metrics.delivered_on_time += 1
        self._trace(Event(t, "deliver", self.sink, {
            "packet": pkt.id, "delay": delay, "hops": len(pkt.hops) - 1,
        }))

    def _drop(self, pkt, t, reason, node_id):
        self.metrics.dropped += 1
        self.metrics.drop_reasons[reason] = (
            self.metrics.drop_reasons.get(reason, 0) + 1
        )
        self._trace(Event(t, "drop", node_id, {"packet": pkt.id, "reason": reason}))

    # ------------------------------------------------------------------
    # main loop
    # ------------------------------------------------------------------

    def run(self) -> RunMetrics:
        while self._heap:
            t, prio, _, payload = heapq.heappop(self._heap)
            kind, arg = payload
            if kind == "tick":
                self._update_tick(t)
            elif kind == "gen":
                self._handle_gen(t, arg)
            else:
                pkt, node_id = arg
                self._handle_hop(t, pkt, node_id)
        return self._finalize()

    def _finalize(self) -> RunMetrics:
        m = self.metrics
        if m.generated != m.delivered + m.dropped:
            raise SimulationError("packet conservation violated")
        m.pdmr = (
            1.0 - m.delivered_on_time / m.generated if m.generated else 0.0
        )
        # energy the data plane spent on all packets (delivered or not) per
        # on-time delivery; control traffic is reported separately
        m.data_energy_j = self._data_energy_pj / PJ
        if m.delivered_on_time:
            m.ecpp_j = self._data_energy_pj / m.delivered_on_time / PJ
        if self._delays:
            m.mean_delay_s = float(np.mean(self._delays))
            m.worst_delay_s = float(np.max(self._delays))
            m.mean_hops = float(np.mean(self._hop_lengths))
            hist = {}
            for h in self._hop_lengths:
                hist[h] = hist.get(h, 0) + 1
            m.hop_counts = hist
        m.control_packets = self.control
        m.energy_used_pj = int((self.used_pj - self._used_pj_at_start).sum())
        m.energy_charged_pj = self.charged_pj
        m.energy_used_j = m.energy_used_pj / PJ
        if m.energy_used_pj != m.energy_charged_pj:
            raise SimulationError("energy ledger mismatch")
        return m


def run_scenario(
    config: ScenarioConfig,
    protocol: str | None = None,
    deadline_ms: float | None = None,
    n_sources: int | None = None,
    seed: int | None = None,
    backend: str | None = None,
    collect_trace: bool = False,
):
    """Execute one scenario cell and return its metrics.

    Unspecified cell coordinates default to the first entry of the matching
    sweep axis in ``config``.  With ``collect_trace`` the returned metrics
    carry a ``trace`` attribute (list of Events).
    """
    protocol = protocol or config.protocols[0]
    deadline_ms = config.deadlines_ms[0] if deadline_ms is None else deadline_ms
    n_sources = n_sources or config.source_counts[0]
    seed = config.seeds[0] if seed is None else seed
    run = _Run(config, protocol, deadline_ms, n_sources, seed, backend, collect_trace)
    metrics = run.run()
    if collect_trace:
        metrics.trace = run.trace
    return metrics
