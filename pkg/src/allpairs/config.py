"""Run configuration: validation, JSON round-trip, and app construction.

A config document is plain JSON with nested sections; everything a run
needs (app parameters, node shapes, cache sizes, scheduler knobs, seed) is
in here, so a metrics file that embeds its config reproduces the run.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .apps import Application, CompositionVectorApp, SyntheticApp
from .presets import SHAPES


@dataclass
class NodeShape:
    device_speeds: list[float] = field(default_factory=lambda: [1.0])
    device_slots: int = 16
    host_slots: int = 64
    cpu_width: int = 2
    # byte budgets; resolved to slot counts (floor) once the app's slot
    # size is known
    device_bytes: int | None = None
    host_bytes: int | None = None

    def resolve_bytes(self, slot_size: int) -> None:
        if self.device_bytes is not None:
            self.device_slots = self.device_bytes // slot_size
            self.device_bytes = None
        if self.host_bytes is not None:
            self.host_slots = self.host_bytes // slot_size
            self.host_bytes = None

    def validate(self) -> None:
        if not self.device_speeds:
            raise ValueError("every node needs at least one device")
        if any(s <= 0 for s in self.device_speeds):
            raise ValueError("device speed factors must be positive")
        if self.device_slots < 2:
            raise ValueError("device tiers need >= 2 slots to hold a pair")
        if self.host_slots < 2:
            raise ValueError("host tiers need >= 2 slots")
        if self.cpu_width < 1:
            raise ValueError("cpu pool width must be >= 1")

    def as_dict(self) -> dict:
        return {"devices": self.device_speeds, "device_slots": self.device_slots,
                "host_slots": self.host_slots, "cpu_width": self.cpu_width}

    @classmethod
    def from_dict(cls, row: dict) -> "NodeShape":
        return cls(
            device_speeds=[float(s) for s in row.get("devices", [1.0])],
            device_slots=int(row.get("device_slots", 16)),
            host_slots=int(row.get("host_slots", 64)),
            cpu_width=int(row.get("cpu_width", 2)),
            device_bytes=row.get("device_bytes"),
            host_bytes=row.get("host_bytes"),
        )


@dataclass
class RunConfig:
    app: dict
    mode: str = "sim"
    seed: int = 0
    nodes: list[NodeShape] = field(default_factory=lambda: [NodeShape()])
    dist_cache: bool = True
    h: int = 1
    leaf_block: int = 8
    job_limit: int | None = None  # default: 4 x device slots
    steal_retry_local: int = 4
    steal_retry_remote: int = 4
    net_latency: float = 10e-6
    net_bandwidth: float = 5e9
    transfer_bandwidth: float = 10e9
    storage_bandwidth: float = math.inf
    storage_latency: float = 0.0
    remote_timeout: float = 5.0
    profiling: bool = False
    keep_results: bool = True

    @property
    def p(self) -> int:
        return len(self.nodes)

    def validate(self) -> None:
        if self.mode not in ("sim", "real"):
            raise ValueError(f"mode must be 'sim' or 'real', got {self.mode!r}")
        if not self.nodes:
            raise ValueError("at least one node required")
        if "kind" not in self.app:
            raise ValueError("app config needs a 'kind'")
        slot_size = self.build_app().slot_size
        for shape in self.nodes:
            shape.resolve_bytes(slot_size)
            shape.validate()
        if not 0 <= self.h <= 8:
            raise ValueError("hop budget h must be in 0..8")
        if self.leaf_block < 1:
            raise ValueError("leaf_block must be >= 1")
        if self.job_limit is not None and self.job_limit < 1:
            raise ValueError("job_limit must be >= 1")
        if self.net_latency < 0 or self.net_bandwidth <= 0:
            raise ValueError("invalid network parameters")
        if self.storage_bandwidth <= 0 or self.storage_latency < 0:
            raise ValueError("invalid storage parameters")

    def job_limit_for(self, shape: NodeShape) -> int:
        if self.job_limit is not None:
            return self.job_limit
        return 4 * shape.device_slots

    def build_app(self) -> Application:
        spec = dict(self.app)
        kind = spec.pop("kind")
        if kind == "synthetic":
            shape_name = spec.pop("shape", None)
            if shape_name is not None:
                shape = SHAPES[shape_name]
                spec.setdefault("costs", {
                    "parse": list(shape.parse),
                    "preprocess": list(shape.preprocess),
                    "compare": list(shape.comparison),
                    "postprocess": list(shape.postprocess),
                })
                spec.setdefault("file_bytes", int(shape.mean_file_bytes))
                spec.setdefault("slot_size", shape.slot_bytes)
                # preprocessed items fill a whole slot unless the user shrank it
                spec.setdefault("item_bytes", min(spec["slot_size"], shape.slot_bytes))
            spec.setdefault("seed", self.seed)
            costs = spec.get("costs")
            if costs is not None:
                spec["costs"] = {k: tuple(v) for k, v in costs.items()}
            return SyntheticApp(**spec)
        if kind == "cv":
            corpus = spec.pop("corpus_dir")
            return CompositionVectorApp(corpus, **spec)
        raise ValueError(f"unknown app kind {kind!r}")

    def as_dict(self) -> dict:
        return {
            "app": self.app,
            "mode": self.mode,
            "seed": self.seed,
            "nodes": [s.as_dict() for s in self.nodes],
            "dist_cache": self.dist_cache,
            "h": self.h,
            "scheduler": {
                "leaf_block": self.leaf_block,
                "job_limit": self.job_limit,
                "steal_retry_local": self.steal_retry_local,
                "steal_retry_remote": self.steal_retry_remote,
            },
            "network": {"latency_s": self.net_latency, "bandwidth_Bps": self.net_bandwidth},
            "transfer_bandwidth_Bps": self.transfer_bandwidth,
            "storage": {
                "bandwidth_Bps": None if math.isinf(self.storage_bandwidth) else self.storage_bandwidth,
                "latency_s": self.storage_latency,
            },
            "remote_timeout_s": self.remote_timeout,
            "profiling": self.profiling,
        }

    @classmethod
    def from_dict(cls, row: dict) -> "RunConfig":
        nodes_spec = row.get("nodes", 1)
        if isinstance(nodes_spec, int):
            template = row.get("node_template", {})
            nodes = [NodeShape.from_dict(template) for _ in range(nodes_spec)]
        else:
            nodes = [NodeShape.from_dict(r) for r in nodes_spec]
        sched = row.get("scheduler", {})
        network = row.get("network", {})
        storage = row.get("storage", {})
        bw = storage.get("bandwidth_Bps")
        config = cls(
            app=dict(row["app"]),
            mode=row.get("mode", "sim"),
            seed=int(row.get("seed", 0)),
            nodes=nodes,
            dist_cache=bool(row.get("dist_cache", True)),
            h=int(row.get("h", 1)),
            leaf_block=int(sched.get("leaf_block", 8)),
            job_limit=sched.get("job_limit"),
            steal_retry_local=int(sched.get("steal_retry_local", 4)),
            steal_retry_remote=int(sched.get("steal_retry_remote", 4)),
            net_latency=float(network.get("latency_s", 10e-6)),
            net_bandwidth=float(network.get("bandwidth_Bps", 5e9)),
            transfer_bandwidth=float(row.get("transfer_bandwidth_Bps", 10e9)),
            storage_bandwidth=math.inf if bw in (None, 0) else float(bw),
            storage_latency=float(storage.get("latency_s", 0.0)),
            remote_timeout=float(row.get("remote_timeout_s", 5.0)),
            profiling=bool(row.get("profiling", False)),
        )
        config.validate()
        return config

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))
