"""Discrete-event execution backend.

Single-threaded and deterministic: every action is an event on one virtual
clock. Lanes are serial resources (k-wide CPU pools are k parallel
sub-lanes), storage is a fair-share pipe with an aggregate cap, and the
network charges latency plus size/bandwidth per channel with FIFO
delivery. Application callbacks run for real at event time; only their
modeled durations occupy the clock.
"""

from __future__ import annotations

import heapq
from typing import Callable, Optional

from .apps import Application
from .config import RunConfig
from .engine import EngineHooks, NodeCore
from .errors import DeadlockError
from .metrics import TraceEvent
from .storage import FairSharePipe, StorageCatalog
from .wire import Frame

STALL_LIMIT = 900.0  # virtual seconds without any stage completing


class _Lane:
    __slots__ = ("name", "node", "pending", "active", "free_at")

    def __init__(self, node: int, name: str):
        self.node = node
        self.name = name
        self.pending: list = []
        self.active = False
        self.free_at = 0.0


class SimEngine(EngineHooks):
    """Runs a whole cluster inside one event loop."""

    def __init__(self, config: RunConfig, app: Application, profiling: bool = False):
        self.config = config
        self.app = app
        self.profiling = profiling or config.profiling
        self._now = 0.0
        self._seq = 0
        self._heap: list = []
        self.trace: list[TraceEvent] = []
        self.finished = False
        self._last_progress = 0.0
        self.catalog = StorageCatalog(app)
        self.pipe = FairSharePipe(config.storage_bandwidth, config.storage_latency,
                                  self.schedule, self.now)
        self._channel_free: dict[tuple[int, int], float] = {}
        self.cores = [
            NodeCore(node_id, config, shape, app, self)
            for node_id, shape in enumerate(config.nodes)
        ]
        self._lanes: dict[tuple[int, str], _Lane] = {}
        for node_id, shape in enumerate(config.nodes):
            for k in range(shape.cpu_width):
                self._add_lane(node_id, f"cpu{k}")
            for d in range(len(shape.device_speeds)):
                self._add_lane(node_id, f"gpu{d}")
                self._add_lane(node_id, f"up{d}")
                self._add_lane(node_id, f"down{d}")
            self._add_lane(node_id, "io0")

    def _add_lane(self, node: int, name: str) -> None:
        self._lanes[(node, name)] = _Lane(node, name)

    # -- EngineHooks -----------------------------------------------------------
    def now(self) -> float:
        return self._now

    def schedule(self, when: float, fn: Callable[[], None]) -> None:
        self._seq += 1
        heapq.heappush(self._heap, (when, self._seq, fn))

    def defer(self, node: int, fn: Callable[[], None]) -> None:
        self.schedule(self._now, fn)

    def call_later(self, node: int, delay: float, fn: Callable[[], None]) -> None:
        self.schedule(self._now + delay, fn)

    def run_stage(self, node: int, lane_kind: str, device: int, label: str,
                  pair, duration: Optional[float], work, on_done) -> None:
        if lane_kind == "cpu":
            lane = self._pick_cpu_lane(node)
        else:
            lane = self._lanes[(node, f"{lane_kind}{device}")]
        dur = float(duration or 0.0)
        lane.free_at = max(lane.free_at, self._now) + dur
        lane.pending.append((label, pair, dur, work, on_done, None))
        if not lane.active:
            self._lane_start_next(lane)

    def io_read(self, node: int, pair, key: int, path: str, on_done) -> None:
        size = self.catalog.size_of(path)
        lane = self._lanes[(node, "io0")]
        lane.pending.append(("load", pair, None, lambda: self.catalog.read(path),
                             on_done, size))
        if not lane.active:
            self._lane_start_next(lane)

    def send_frame(self, src: int, dst: int, frame: Frame) -> None:
        assert dst != src
        channel = (src, dst)
        start = max(self._now, self._channel_free.get(channel, 0.0))
        free = start + frame.wire_size() / self.config.net_bandwidth
        self._channel_free[channel] = free
        self.schedule(free + self.config.net_latency,
                      lambda: self.cores[dst].handle_frame(frame))

    def master_finished(self) -> None:
        self.finished = True

    # -- lane machinery -----------------------------------------------------------
    def _pick_cpu_lane(self, node: int) -> _Lane:
        best = None
        for k in range(self.config.nodes[node].cpu_width):
            lane = self._lanes[(node, f"cpu{k}")]
            if best is None or lane.free_at < best.free_at:
                best = lane
        return best

    def _lane_start_next(self, lane: _Lane) -> None:
        if not lane.pending:
            lane.active = False
            return
        lane.active = True
        label, pair, duration, work, on_done, io_size = lane.pending.pop(0)
        start = self._now
        if io_size is not None:
            self.pipe.request(io_size,
                              lambda: self._lane_finish(lane, label, pair, start, work, on_done))
        else:
            self.schedule(start + duration,
                          lambda: self._lane_finish(lane, label, pair, start, work, on_done))

    def _lane_finish(self, lane: _Lane, label: str, pair, start: float,
                     work, on_done) -> None:
        end = self._now
        core = self.cores[lane.node]
        core.metrics.lane_busy[lane.name] = core.metrics.lane_busy.get(lane.name, 0.0) + (end - start)
        if self.profiling:
            self.trace.append(TraceEvent(lane.node, lane.name, label,
                                         int(start * 1e9), int(end * 1e9),
                                         pair[0], pair[1]))
        self._last_progress = end
        result = work()
        self._lane_start_next(lane)
        on_done(result)

    # -- main loop ------------------------------------------------------------
    def run(self) -> NodeCore:
        for core in self.cores:
            self.schedule(0.0, core.boot)
        while not self.finished:
            if not self._heap:
                raise DeadlockError("event queue empty with work outstanding\n" +
                                    self._dump())
            when, _, fn = heapq.heappop(self._heap)
            self._now = when
            if self._now - self._last_progress > STALL_LIMIT:
                raise DeadlockError(
                    f"no stage completed for {STALL_LIMIT}s of virtual time\n" + self._dump())
            fn()
        return self.cores[0]

    def _dump(self) -> str:
        return "\n".join(core.dump_state() for core in self.cores)
