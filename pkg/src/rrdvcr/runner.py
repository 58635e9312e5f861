"""Sweep orchestration: cross-product execution and CSV/JSON reporting.

Runs are independent given (config, cell), so sweeps can fan out over a
process pool; results are always reported in cell order, never arrival
order, so output files are byte-stable for a fixed config and seed list.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .config import ScenarioConfig
from .engine import RunMetrics, run_scenario

RUNS_HEADER = [
    "protocol",
    "deadline_ms",
    "sources",
    "seed",
    "pdmr",
    "ecpp_mJ",
    "mean_delay_ms",
    "worst_delay_ms",
    "mean_hops",
    "control_packets",
]

SUMMARY_HEADER = [
    "protocol",
    "deadline_ms",
    "sources",
    "runs",
    "pdmr",
    "ecpp_mJ",
    "mean_delay_ms",
    "worst_delay_ms",
    "mean_hops",
    "control_packets",
]


@dataclass(frozen=True)
class RunSpec:
    protocol: str
    deadline_ms: float
    sources: int
    seed: int


def sweep_cells(config: ScenarioConfig) -> list[RunSpec]:
    """The sweep's cross product in deterministic output order."""
    return [
        RunSpec(p, d, s, seed)
        for p in config.protocols
        for d in config.deadlines_ms
        for s in config.source_counts
        for seed in config.seeds
    ]


def _execute(args) -> RunMetrics:
    config, spec, backend = args
    return run_scenario(
        config,
        protocol=spec.protocol,
        deadline_ms=spec.deadline_ms,
        n_sources=spec.sources,
        seed=spec.seed,
        backend=backend,
    )


def run_sweep(
    config: ScenarioConfig,
    jobs: int = 1,
    backend: str | None = None,
    cells: list[RunSpec] | None = None,
) -> list[RunMetrics]:
    """Execute every sweep cell; results come back in cell order."""
    if cells is None:
        cells = sweep_cells(config)
    tasks = [(config, spec, backend) for spec in cells]
    if jobs <= 1 or len(cells) <= 1:
        return [_execute(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_execute, tasks, chunksize=4))


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _run_row(m: RunMetrics) -> list:
    return [
        m.protocol,
        _fmt(m.deadline_ms),
        m.sources,
        m.seed,
        _fmt(m.pdmr),
        _fmt(m.ecpp_mj),
        _fmt(m.mean_delay_s * 1e3),
        _fmt(m.worst_delay_s * 1e3),
        _fmt(m.mean_hops),
        m.control_packets,
    ]


def runs_csv_text(results: list[RunMetrics]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RUNS_HEADER)
    for m in results:
        writer.writerow(_run_row(m))
    return buf.getvalue()


def summarize(results: list[RunMetrics]) -> list[dict]:
    """Per-cell (protocol, deadline, sources) means over seeds."""
    groups: dict[tuple, list[RunMetrics]] = {}
    order = []
    for m in results:
        key = (m.protocol, m.deadline_ms, m.sources)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(m)
    rows = []
    for key in order:
        ms = groups[key]
        n = len(ms)
        rows.append(
            {
                "protocol": key[0],
                "deadline_ms": key[1],
                "sources": key[2],
                "runs": n,
                "pdmr": sum(m.pdmr for m in ms) / n,
                "ecpp_mJ": sum(m.ecpp_mj for m in ms) / n,
                "mean_delay_ms": sum(m.mean_delay_s for m in ms) / n * 1e3,
                "worst_delay_ms": max(m.worst_delay_s for m in ms) * 1e3,
                "mean_hops": sum(m.mean_hops for m in ms) / n,
                "control_packets": sum(m.control_packets for m in ms) / n,
            }
        )
    return rows


def summary_csv_text(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_HEADER)
    for r in rows:
        writer.writerow(
            [
                r["protocol"],
                _fmt(r["deadline_ms"]),
                r["sources"],
                r["runs"],
                _fmt(r["pdmr"]),
                _fmt(r["ecpp_mJ"]),
                _fmt(r["mean_delay_ms"]),
                _fmt(r["worst_delay_ms"]),
                _fmt(r["mean_hops"]),
                _fmt(r["control_packets"]),
            ]
        )
    return buf.getvalue()


def summary_table(rows: list[dict]) -> str:
    head = f"{'protocol':>8} {'deadl_ms':>9} {'src':>4} {'runs':>5} {'pdmr':>7} {'ecpp_mJ':>9} {'hops':>6} {'ctrl':>8}"
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(
            f"{r['protocol']:>8} {r['deadline_ms']:>9.0f} {r['sources']:>4} "
            f"{r['runs']:>5} {r['pdmr']:>7.3f} {r['ecpp_mJ']:>9.3f} "
            f"{r['mean_hops']:>6.2f} {r['control_packets']:>8.0f}"
        )
    return "\n".join(lines)
