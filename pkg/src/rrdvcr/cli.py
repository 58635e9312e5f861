"""Command-line sweep runner.

Executes the cross product of protocols x deadlines x source counts x seeds
from a JSON config (with flag overrides), writing one CSV row per run plus a
summary of per-cell means.  A separate mode compares delivered hop counts on
sparse line deployments of several network sizes.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, ScenarioConfig
from . import runner


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # config errors exit 1, not argparse's 2
        raise ConfigError(message)


def _int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _seed_range(text: str) -> list[int]:
    """Seeds as '1..20', '7', or '1,4,9'."""
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return _int_list(text)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rrdvcr-sim", description=__doc__)
    p.add_argument("--config", type=Path, help="JSON scenario config")
    p.add_argument("--protocol", help="comma list: rrdvcr,thvr,speed")
    p.add_argument("--deadline-ms", help="comma list of deadlines in ms")
    p.add_argument("--sources", help="comma list of source counts")
    p.add_argument("--seeds", help="seed range '1..20' or comma list")
    p.add_argument("--f-mode", choices=["paper", "monotone", "fixed"])
    p.add_argument("--f-fixed", type=float, help="weight used when --f-mode fixed")
    p.add_argument("--mtx-mode", choices=["literal", "reliability"])
    p.add_argument("--sim-seconds", type=float)
    p.add_argument("--out", type=Path, default=Path("results"))
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--backend", choices=["numba", "numpy"])
    p.add_argument("--dump-json", action="store_true",
                   help="also write per-run metrics as runs.ndjson")
    p.add_argument("--hops-experiment",
                   help="comma list of line-network sizes; runs the hop-count "
                        "comparison instead of the deadline sweep")
    p.add_argument("--hops-deadline-ms", type=float, default=10000.0)
    return p


def _load_config(args) -> ScenarioConfig:
    if args.config is not None:
        try:
            text = args.config.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        config = ScenarioConfig.from_json(text)
    else:
        config = ScenarioConfig()

    if args.protocol:
        config.protocols = [tok.strip() for tok in args.protocol.split(",") if tok.strip()]
    if args.deadline_ms:
        config.deadlines_ms = _float_list(args.deadline_ms)
    if args.sources:
        config.source_counts = _int_list(args.sources)
    if args.seeds:
        config.seeds = _seed_range(args.seeds)
    if args.f_mode:
        config.metric.f_mode = args.f_mode
    if args.f_fixed is not None:
        config.metric.f_fixed = args.f_fixed
    if args.mtx_mode:
        config.metric.mtx_term_mode = args.mtx_mode
    if args.sim_seconds:
        config.sim_seconds = args.sim_seconds
    config.metric.__post_init__()  # re-validate after overrides
    config.__post_init__()
    return config


def _run_sweep(config: ScenarioConfig, args) -> int:
    results = runner.run_sweep(config, jobs=args.jobs, backend=args.backend)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    (out / "runs.csv").write_text(runner.runs_csv_text(results))
    rows = runner.summarize(results)
    (out / "summary.csv").write_text(runner.summary_csv_text(rows))
    if args.dump_json:
        with open(out / "runs.ndjson", "w") as fh:
            for m in results:
                fh.write(m.to_json() + "\n")
    print(runner.summary_table(rows))
    print(f"\n{len(results)} runs -> {out / 'runs.csv'}")
    return 0


def _run_hops_experiment(config: ScenarioConfig, args) -> int:
    sizes = _int_list(args.hops_experiment)
    if not sizes or any(s < 2 for s in sizes):
        raise ConfigError("--hops-experiment needs sizes >= 2")
    protocols = [p for p in config.protocols if p in ("rrdvcr", "thvr")] or [
        "rrdvcr",
        "thvr",
    ]
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    lines = ["size,protocol,seed,delivered,mean_hops"]
    means: dict[tuple, list[float]] = {}
    for size in sizes:
        cfg = ScenarioConfig.from_dict(config.to_dict())
        cfg.topology = "line"
        cfg.line_nodes = size
        cfg.deadlines_ms = [args.hops_deadline_ms]
        cfg.source_counts = [1]
        cfg.protocols = protocols
        results = runner.run_sweep(cfg, jobs=args.jobs, backend=args.backend)
        for m in results:
            lines.append(
                f"{size},{m.protocol},{m.seed},{m.delivered},{m.mean_hops:.6f}"
            )
            means.setdefault((size, m.protocol), []).append(m.mean_hops)
    (out / "hops.csv").write_text("\n".join(lines) + "\n")

    print(f"{'size':>6} " + " ".join(f"{p:>10}" for p in protocols))
    for size in sizes:
        cells = [
            sum(means[(size, p)]) / len(means[(size, p)]) for p in protocols
        ]
        print(f"{size:>6} " + " ".join(f"{c:>10.2f}" for c in cells))
    print(f"\nhop-count table -> {out / 'hops.csv'}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = _load_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.hops_experiment:
            return _run_hops_experiment(config, args)
        return _run_sweep(config, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
