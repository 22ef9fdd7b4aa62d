"""Run accounting: per-lane trace events and per-run counter summaries.

The trace file is newline-delimited JSON, one object per executed stage
with integer-nanosecond start/end times; the metrics summary is a single
JSON document embedding the originating config so a run can be replayed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field


@dataclass(frozen=True)
class TraceEvent:
    node: int
    lane: str
    label: str
    start_ns: int
    end_ns: int
    i: int
    j: int

    def as_dict(self) -> dict:
        return {"node": self.node, "lane": self.lane, "label": self.label,
                "start_ns": self.start_ns, "end_ns": self.end_ns,
                "i": self.i, "j": self.j}


def write_trace(path: str, events: list[TraceEvent]) -> None:
    with open(path, "w") as fh:
        for event in events:
            fh.write(json.dumps(event.as_dict(), separators=(",", ":")) + "\n")


def read_trace(path: str) -> list[TraceEvent]:
    events = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            events.append(TraceEvent(row["node"], row["lane"], row["label"],
                                     row["start_ns"], row["end_ns"], row["i"], row["j"]))
    return events


@dataclass
class NodeMetrics:
    """Counters owned by one node; serialized over the wire at shutdown."""

    node: int
    loads: int = 0
    parses: int = 0
    preprocesses: int = 0
    comparisons: int = 0
    io_bytes: int = 0
    submitted: int = 0
    steals_local: int = 0
    steals_remote: int = 0
    steal_requests_failed: int = 0
    messages_sent: dict = field(default_factory=dict)   # kind name -> count
    cache: dict = field(default_factory=dict)           # tier name -> snapshot_stats
    remote_requests: int = 0
    remote_hits_by_hop: dict = field(default_factory=dict)
    remote_failures: int = 0
    remote_timeouts: int = 0
    load_counts: dict = field(default_factory=dict)     # key -> times loaded
    lane_busy: dict = field(default_factory=dict)       # lane -> busy seconds
    noslot_retries: int = 0
    finish_time: float = 0.0

    def as_dict(self) -> dict:
        out = dict(self.__dict__)
        out["remote_hits_by_hop"] = {str(k): v for k, v in self.remote_hits_by_hop.items()}
        out["load_counts"] = {str(k): v for k, v in self.load_counts.items()}
        return out

    @classmethod
    def from_dict(cls, row: dict) -> "NodeMetrics":
        row = dict(row)
        row["remote_hits_by_hop"] = {int(k): v for k, v in row.get("remote_hits_by_hop", {}).items()}
        row["load_counts"] = {int(k): v for k, v in row.get("load_counts", {}).items()}
        return cls(**row)


@dataclass
class RunMetrics:
    """Aggregated outcome of one run."""

    config: dict
    n: int
    pairs: int
    makespan: float
    total_loads: int
    r_factor: float
    per_node: list[NodeMetrics]
    efficiency: float | None = None
    efficiency_r_adjusted: float | None = None
    t_min: float | None = None
    io_bytes: int = 0
    io_rate: float = 0.0
    wall_time: float = 0.0
    results: dict = field(default_factory=dict)  # (i, j) -> PairResult; master node only

    def cache_totals(self) -> dict:
        totals: dict[str, dict[str, int]] = {}
        for nm in self.per_node:
            for tier, stats in nm.cache.items():
                kind = "device" if tier.startswith("dev") else "host"
                agg = totals.setdefault(kind, {})
                for field_name, value in stats.items():
                    agg[field_name] = agg.get(field_name, 0) + value
        return totals

    def remote_totals(self) -> dict:
        hits: dict[int, int] = {}
        requests = failures = timeouts = 0
        for nm in self.per_node:
            requests += nm.remote_requests
            failures += nm.remote_failures
            timeouts += nm.remote_timeouts
            for hop, count in nm.remote_hits_by_hop.items():
                hits[hop] = hits.get(hop, 0) + count
        return {"requests": requests, "failures": failures,
                "timeouts": timeouts, "hits_by_hop": hits}

    def message_totals(self) -> dict:
        totals: dict[str, int] = {}
        for nm in self.per_node:
            for kind, count in nm.messages_sent.items():
                totals[kind] = totals.get(kind, 0) + count
        return totals

    def as_dict(self) -> dict:
        return {
            "config": self.config,
            "n": self.n,
            "pairs": self.pairs,
            "makespan_s": self.makespan,
            "total_loads": self.total_loads,
            "R": self.r_factor,
            "t_min_s": self.t_min,
            "efficiency": self.efficiency,
            "efficiency_r_adjusted": self.efficiency_r_adjusted,
            "io_bytes": self.io_bytes,
            "io_rate_Bps": self.io_rate,
            "wall_time_s": self.wall_time,
            "cache": self.cache_totals(),
            "remote": self.remote_totals(),
            "messages": self.message_totals(),
            "per_node": [nm.as_dict() for nm in self.per_node],
        }

    def write(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.as_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
