"""Threaded execution backend.

One dispatcher thread owns the node's state; lane threads (CPU pool, one
launcher and two transfer threads per device, one I/O thread) execute
stages and hand completions back to the dispatcher. Modeled stage costs
are honored by waiting out the remainder after the real work finishes;
storage reads are throttled by a token bucket.
"""

from __future__ import annotations

import queue
import threading
import time
from typing import Callable, Optional

from .apps import Application
from .config import RunConfig
from .engine import EngineHooks, NodeCore
from .errors import DeadlockError
from .metrics import TraceEvent
from .storage import StorageCatalog, TokenBucket
from .wire import Frame, Kind

_STOP = object()


class RealEngine(EngineHooks):
    """Runs one node on OS threads; peers (if any) sit behind a transport."""

    def __init__(self, config: RunConfig, app: Application, node_id: int = 0,
                 transport=None, run_timeout: float = 300.0):
        self.config = config
        self.app = app
        self.node_id = node_id
        self.transport = transport
        self.run_timeout = run_timeout
        if config.p > 1 and transport is None:
            raise ValueError("multi-node real runs need a transport")
        self.catalog = StorageCatalog(app)
        self.bucket = TokenBucket(config.storage_bandwidth)
        self.profiling = config.profiling
        self.trace: list[TraceEvent] = []
        self._trace_lock = threading.Lock()
        self._epoch = time.perf_counter()
        self._dispatch: queue.Queue = queue.Queue()
        self._lane_queues: dict[str, queue.Queue] = {}
        self._threads: list[threading.Thread] = []
        self._timers: list[threading.Timer] = []
        self._finished = threading.Event()
        self._error: Optional[BaseException] = None
        self.core = NodeCore(node_id, config, config.nodes[node_id], app, self)

    # -- EngineHooks -----------------------------------------------------------
    def now(self) -> float:
        return time.perf_counter() - self._epoch

    def defer(self, node: int, fn: Callable[[], None]) -> None:
        self._dispatch.put(fn)

    def call_later(self, node: int, delay: float, fn: Callable[[], None]) -> None:
        timer = threading.Timer(delay, lambda: self._dispatch.put(fn))
        timer.daemon = True
        self._timers.append(timer)
        timer.start()

    def run_stage(self, node: int, lane_kind: str, device: int, label: str,
                  pair, duration: Optional[float], work, on_done) -> None:
        lane = "cpu" if lane_kind == "cpu" else f"{lane_kind}{device}"
        self._lane_queues[lane].put((label, pair, duration, work, on_done))

    def io_read(self, node: int, pair, key: int, path: str, on_done) -> None:
        self._lane_queues["io"].put(("load", pair, None, (key, path), on_done))

    def send_frame(self, src: int, dst: int, frame: Frame) -> None:
        assert self.transport is not None, "no transport in a single-node run"
        self.transport.send(dst, frame)

    def master_finished(self) -> None:
        if self.node_id == 0 and self.transport is not None:
            for dst in range(1, self.config.p):
                self.transport.send(dst, Frame(Kind.FINAL))
        self._finished.set()

    # -- threads ---------------------------------------------------------------
    def _dispatcher_loop(self) -> None:
        while True:
            fn = self._dispatch.get()
            if fn is _STOP:
                return
            try:
                fn()
            except BaseException as exc:  # abort the run with a diagnostic
                self._error = exc
                self._finished.set()
                return

    def _lane_loop(self, lane: str, trace_lane: str) -> None:
        q = self._lane_queues[lane]
        while True:
            entry = q.get()
            if entry is _STOP:
                return
            label, pair, duration, work, on_done = entry
            start = self.now()
            try:
                if lane == "io":
                    key, path = work
                    self.bucket.acquire(self.catalog.size_of(path))
                    result = self.catalog.read(path)
                else:
                    result = work()
                    if duration:
                        self._wait_until(start + duration)
            except BaseException as exc:
                self._error = exc
                self._finished.set()
                return
            end = self.now()
            with self._trace_lock:
                busy = self.core.metrics.lane_busy
                busy[trace_lane] = busy.get(trace_lane, 0.0) + (end - start)
                if self.profiling:
                    self.trace.append(TraceEvent(self.node_id, trace_lane, label,
                                                 int(start * 1e9), int(end * 1e9),
                                                 pair[0], pair[1]))
            self._dispatch.put(lambda cb=on_done, res=result: cb(res))

    def _wait_until(self, target: float) -> None:
        # occupy the lane for the modeled cost: coarse sleep, then yield-spin
        while True:
            remaining = target - self.now()
            if remaining <= 0:
                return
            if remaining > 0.002:
                time.sleep(remaining - 0.001)
            else:
                time.sleep(0)

    def _start_threads(self) -> None:
        shape = self.config.nodes[self.node_id]
        self._lane_queues["io"] = queue.Queue()
        self._spawn(lambda: self._lane_loop("io", "io0"), "io")
        self._lane_queues["cpu"] = queue.Queue()
        for k in range(shape.cpu_width):
            self._spawn(lambda k=k: self._cpu_loop(k), f"cpu{k}")
        for d in range(len(shape.device_speeds)):
            for kind in ("gpu", "up", "down"):
                lane = f"{kind}{d}"
                self._lane_queues[lane] = queue.Queue()
                self._spawn(lambda lane=lane: self._lane_loop(lane, lane), lane)
        self._spawn(self._dispatcher_loop, "dispatcher")

    def _cpu_loop(self, index: int) -> None:
        self._lane_loop("cpu", f"cpu{index}")

    def _spawn(self, target, name: str) -> None:
        thread = threading.Thread(target=target, name=f"node{self.node_id}-{name}", daemon=True)
        thread.start()
        self._threads.append(thread)

    # -- run -------------------------------------------------------------------
    def run(self) -> NodeCore:
        if self.transport is not None:
            self.transport.start(lambda frame: self._on_frame(frame))
            self.transport.barrier()
        self._epoch = time.perf_counter()
        self._start_threads()
        self._dispatch.put(self.core.boot)
        if not self._finished.wait(self.run_timeout):
            self._shutdown()
            raise DeadlockError("run timed out\n" + self.core.dump_state())
        self._shutdown()
        if self._error is not None:
            raise self._error
        return self.core

    def _on_frame(self, frame: Frame) -> None:
        if frame.kind == Kind.FINAL:
            self._finished.set()
            return
        self._dispatch.put(lambda: self.core.handle_frame(frame))

    def _shutdown(self) -> None:
        for timer in self._timers:
            timer.cancel()
        self._dispatch.put(_STOP)
        shape = self.config.nodes[self.node_id]
        self._lane_queues["io"].put(_STOP)
        for _ in range(shape.cpu_width):
            self._lane_queues["cpu"].put(_STOP)
        for d in range(len(shape.device_speeds)):
            for kind in ("gpu", "up", "down"):
                self._lane_queues[f"{kind}{d}"].put(_STOP)
        for thread in self._threads:
            thread.join(timeout=10.0)
        if self.transport is not None:
            self.transport.close()
