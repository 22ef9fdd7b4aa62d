"""Command-line entry point: single runs, parameter sweeps, model queries."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys

from .config import NodeShape, RunConfig
from .metrics import write_trace
from .perfmodel import StageCosts, report
from .runner import run, run_socket_rank


def _load_config(args) -> RunConfig:
    if args.config:
        config = RunConfig.from_file(args.config)
    else:
        config = RunConfig(app={"kind": "synthetic", "n": 64})
    if args.mode:
        config.mode = args.mode
    if args.seed is not None:
        config.seed = args.seed  # the app seed follows unless set explicitly
    if args.nodes is not None:
        template = config.nodes[0]
        config.nodes = [
            NodeShape(list(template.device_speeds), template.device_slots,
                      template.host_slots, template.cpu_width)
            for _ in range(args.nodes)
        ]
    if getattr(args, "trace", None):
        config.profiling = True
    config.validate()
    return config


def _print_summary(metrics) -> None:
    print(f"n={metrics.n} pairs={metrics.pairs} makespan={metrics.makespan:.6g}s "
          f"loads={metrics.total_loads} R={metrics.r_factor:.4g}"
          + (f" efficiency={metrics.efficiency:.4g}" if metrics.efficiency is not None else ""))


def cmd_run(args) -> int:
    config = _load_config(args)
    trace = [] if config.profiling else None
    if args.rank is not None:
        peers = [(host, int(port)) for host, port in
                 (addr.rsplit(":", 1) for addr in args.peers.split(","))]
        metrics = run_socket_rank(config, args.rank, peers, trace_out=trace)
        if metrics is None:
            return 0  # non-master rank
    else:
        metrics = run(config, trace_out=trace)
    if args.metrics:
        metrics.write(args.metrics)
    if args.trace and trace is not None:
        write_trace(args.trace, trace)
    _print_summary(metrics)
    return 0


SWEEP_AXES = ("cache_size", "nodes", "h", "seed")


def _apply_axis(config: RunConfig, axis: str, value: int) -> None:
    if axis == "cache_size":
        for shape in config.nodes:
            shape.host_slots = int(value)
    elif axis == "nodes":
        template = config.nodes[0]
        config.nodes = [
            NodeShape(list(template.device_speeds), template.device_slots,
                      template.host_slots, template.cpu_width)
            for _ in range(int(value))
        ]
    elif axis == "h":
        config.h = int(value)
    elif axis == "seed":
        config.seed = int(value)
    else:
        raise ValueError(f"unknown sweep axis {axis!r}")


def cmd_sweep(args) -> int:
    base = _load_config(args)
    values = [int(v) for v in args.values.split(",") if v.strip() != ""]
    if not values:
        print("error: --values must list at least one value", file=sys.stderr)
        return 2
    seeds = list(range(base.seed, base.seed + args.seeds)) if args.axis != "seed" else [base.seed]
    dist_variants = [True, False] if args.paired_dist_cache else [base.dist_cache]

    rows = []
    baselines = {}  # (seed, dist) -> single-node makespan, for speedup
    for value in values:
        for seed in seeds:
            for dist in dist_variants:
                config = RunConfig.from_dict(base.as_dict())
                _apply_axis(config, args.axis, value)
                config.seed = seed
                config.dist_cache = dist
                config.validate()
                metrics = run(config)
                if args.axis == "nodes" and int(value) == 1:
                    baselines[(seed, dist)] = metrics.makespan
                speedup = ""
                if args.axis == "nodes":
                    base_time = baselines.get((seed, dist))
                    if base_time:
                        speedup = f"{base_time / metrics.makespan:.6g}"
                rows.append({
                    "axis": args.axis, "value": value, "seed": seed,
                    "dist_cache": int(dist), "n": metrics.n, "p": config.p,
                    "makespan_s": f"{metrics.makespan:.9g}",
                    "loads": metrics.total_loads,
                    "R": f"{metrics.r_factor:.6g}",
                    "efficiency": "" if metrics.efficiency is None else f"{metrics.efficiency:.6g}",
                    "io_rate_Bps": f"{metrics.io_rate:.6g}",
                    "speedup": speedup,
                })
    out = args.out or "sweep.csv"
    with open(out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {len(rows)} rows to {out}")
    return 0


def cmd_model(args) -> int:
    with open(args.costs) as fh:
        raw = json.load(fh)
    bw = raw.get("io_bandwidth_Bps")
    costs = StageCosts(
        t_parse=float(raw.get("t_parse_s", 0.0)),
        t_preprocess=float(raw.get("t_preprocess_s", 0.0)),
        t_comparison=float(raw.get("t_comparison_s", 0.0)),
        t_postprocess=float(raw.get("t_postprocess_s", 0.0)),
        mean_file_bytes=float(raw.get("mean_file_bytes", 0.0)),
        io_bandwidth=float(bw) if bw else math.inf,
    )
    rep = report(args.n, args.r, costs, p=args.p, t_measured=args.measured)
    print(json.dumps(rep.as_dict(), indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="allpairs",
        description="Run all-pairs compute workloads on a simulated or real cluster.")
    sub = parser.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="execute one run and write metrics")
    runp.add_argument("--config", help="JSON run-config document")
    runp.add_argument("--mode", choices=("sim", "real"))
    runp.add_argument("--nodes", type=int, help="replicate the first node shape N times (sim)")
    runp.add_argument("--seed", type=int)
    runp.add_argument("--rank", type=int, help="this process's node id (sockets mode)")
    runp.add_argument("--peers", help="comma-separated host:port for every rank (sockets mode)")
    runp.add_argument("--metrics", help="write the metrics JSON document here")
    runp.add_argument("--trace", help="write a JSONL stage trace here (enables profiling)")
    runp.set_defaults(fn=cmd_run)

    sweepp = sub.add_parser("sweep", help="run a parameter sweep and write a CSV table")
    sweepp.add_argument("--config", help="JSON run-config document")
    sweepp.add_argument("--mode", choices=("sim", "real"))
    sweepp.add_argument("--nodes", type=int)
    sweepp.add_argument("--seed", type=int)
    sweepp.add_argument("--axis", required=True, choices=SWEEP_AXES)
    sweepp.add_argument("--values", required=True, help="comma-separated axis values")
    sweepp.add_argument("--seeds", type=int, default=1, help="repetitions per value")
    sweepp.add_argument("--paired-dist-cache", action="store_true",
                        help="run every point with the distributed cache on and off")
    sweepp.add_argument("--out", help="output CSV path (default sweep.csv)")
    sweepp.set_defaults(fn=cmd_sweep)

    modelp = sub.add_parser("model", help="evaluate the analytical performance model")
    modelp.add_argument("--costs", required=True, help="JSON stage-costs document")
    modelp.add_argument("--n", type=int, required=True)
    modelp.add_argument("--r", type=float, default=1.0)
    modelp.add_argument("-p", type=int, default=1)
    modelp.add_argument("--measured", type=float, help="measured run time for efficiency")
    modelp.set_defaults(fn=cmd_model)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run" and (args.rank is None) != (args.peers is None):
        print("error: --rank and --peers go together", file=sys.stderr)
        return 2
    try:
        return args.fn(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
