"""Top-level run orchestration for both execution modes."""

from __future__ import annotations

import math
import time
from typing import Optional

from .config import RunConfig
from .engine import NodeCore
from .metrics import RunMetrics, TraceEvent
from .perfmodel import StageCosts, pair_count, t_gpu, t_min


def stage_costs_from_config(config: RunConfig) -> Optional[StageCosts]:
    costs = config.app.get("costs")
    shape = config.app.get("shape")
    if costs is None and shape is not None:
        from .presets import SHAPES
        preset = SHAPES[shape]
        costs = {"parse": preset.parse, "preprocess": preset.preprocess,
                 "compare": preset.comparison, "postprocess": preset.postprocess}
    if costs is None:
        return None
    mean = lambda stage: float(costs.get(stage, (0.0, 0.0))[0])
    bw = config.storage_bandwidth
    file_bytes = float(config.app.get("file_bytes", 0) or 0)
    return StageCosts(
        t_parse=mean("parse"), t_preprocess=mean("preprocess"),
        t_comparison=mean("compare"), t_postprocess=mean("postprocess"),
        mean_file_bytes=file_bytes,
        io_bandwidth=bw if not math.isinf(bw) else math.inf,
    )


def assemble_metrics(config: RunConfig, master: NodeCore, wall_time: float) -> RunMetrics:
    n = master.app.n
    per_node = [master.collected[i] for i in sorted(master.collected)]
    total_loads = sum(nm.loads for nm in per_node)
    makespan = master.makespan if master.makespan is not None else 0.0
    r_factor = total_loads / n if n else 0.0
    io_bytes = sum(nm.io_bytes for nm in per_node)

    efficiency = efficiency_r = lower = None
    costs = stage_costs_from_config(config)
    if costs is not None and makespan > 0:
        lower = t_min(n, costs)
        efficiency = (lower / config.p) / makespan
        efficiency_r = (t_gpu(n, max(r_factor, 1.0), costs) / config.p) / makespan

    return RunMetrics(
        config=config.as_dict(),
        n=n,
        pairs=pair_count(n),
        makespan=makespan,
        total_loads=total_loads,
        r_factor=r_factor,
        per_node=per_node,
        efficiency=efficiency,
        efficiency_r_adjusted=efficiency_r,
        t_min=lower,
        io_bytes=io_bytes,
        io_rate=io_bytes / makespan if makespan > 0 else 0.0,
        wall_time=wall_time,
        results=dict(master.results),
    )


def run(config: RunConfig, trace_out: Optional[list[TraceEvent]] = None) -> RunMetrics:
    """Execute a run in-process (sim mode, or real mode on a single node)."""
    config.validate()
    started = time.perf_counter()
    if config.mode == "sim":
        from .simrun import SimEngine
        engine = SimEngine(config, config.build_app())
        master = engine.run()
    else:
        if config.p != 1:
            raise ValueError(
                "real mode with multiple nodes runs as one OS process per node; "
                "use the CLI with --rank/--peers")
        from .realrun import RealEngine
        engine = RealEngine(config, config.build_app())
        master = engine.run()
    if trace_out is not None:
        trace_out.extend(engine.trace)
    return assemble_metrics(config, master, time.perf_counter() - started)


def run_socket_rank(config: RunConfig, rank: int, addresses: list[tuple[str, int]],
                    trace_out: Optional[list[TraceEvent]] = None) -> Optional[RunMetrics]:
    """Run one rank of a multi-process cluster; metrics come back on rank 0."""
    config.validate()
    if config.mode != "real":
        raise ValueError("socket clusters run in real mode")
    if len(addresses) != config.p:
        raise ValueError("need one address per configured node")
    started = time.perf_counter()
    from .realrun import RealEngine
    from .cluster import SocketTransport
    transport = SocketTransport(rank, addresses)
    engine = RealEngine(config, config.build_app(), node_id=rank, transport=transport)
    master = engine.run()
    if trace_out is not None:
        trace_out.extend(engine.trace)
    if rank == 0:
        return assemble_metrics(config, master, time.perf_counter() - started)
    return None
