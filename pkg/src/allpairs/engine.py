"""Mode-independent runtime core.

One NodeCore per node drives jobs through the cache policy and pipeline
stages, handles protocol frames, and runs the work-stealing policy. All
NodeCore state is mutated only from its dispatcher context; the engine
backend (discrete-event or threaded) supplies time, deferral, lanes, and
transport through the small EngineHooks surface.

Per-pair flow: each key is driven to device-tier residency in ascending
key order (device lookup, then host, then remote peers, then a local
load), after which the comparison runs on the device lane and the result
is downloaded and post-processed. Loaded items are published to the host
tier before (or together with) the device tier, so remote peers can always
serve anything a device tier ever held.
"""

from __future__ import annotations

import json
from collections import deque
from random import Random
from typing import Callable, Optional

from .apps import Application, ItemData, PairResult, Stage
from .config import NodeShape, RunConfig
from .distcache import FetchProtocol
from .errors import NoEvictableSlot
from .metrics import NodeMetrics
from .rng import mix64
from .scheduler import JobLimiter, PairLedger, Region, TaskNode, WorkerDeque, root_region
from .slotcache import CacheTier, Hit, MustWait
from .wire import (
    Frame,
    Kind,
    pack_completions,
    pack_steal_request,
    pack_steal_response,
    unpack_completions,
    unpack_steal_request,
    unpack_steal_response,
)

NOMINAL_COSTS = {"parse": 1e-3, "preprocess": 1e-3, "compare": 1e-3, "postprocess": 1e-4}

COMPLETION_FLUSH = 64
NOSLOT_BASE_DELAY = 0.5e-3
NOSLOT_MAX_DELAY = 8e-3
NOSLOT_RESTART_TRIES = 8  # safety valve; the device gate makes this rare
IDLE_BACKOFF_BASE = 1e-3
IDLE_BACKOFF_MAX = 64e-3


class EngineHooks:
    """What a backend must provide to NodeCore. See SimEngine / RealEngine."""

    def now(self) -> float:
        raise NotImplementedError

    def defer(self, node: int, fn: Callable[[], None]) -> None:
        raise NotImplementedError

    def call_later(self, node: int, delay: float, fn: Callable[[], None]) -> None:
        raise NotImplementedError

    def run_stage(self, node: int, lane_kind: str, device: int, label: str,
                  pair: tuple[int, int], duration: Optional[float],
                  work: Callable[[], object], on_done: Callable[[object], None]) -> None:
        raise NotImplementedError

    def io_read(self, node: int, pair: tuple[int, int], key: int, path: str,
                on_done: Callable[[bytes], None]) -> None:
        raise NotImplementedError

    def send_frame(self, src: int, dst: int, frame: Frame) -> None:
        raise NotImplementedError

    def master_finished(self) -> None:
        raise NotImplementedError


class DeviceState:
    """One device: its cache tier plus an admission gate for slot users.

    A pair job pins up to two slots at once; admitting at most
    capacity - 1 such jobs guarantees some job can always complete
    (with S slots and k <= S-1 holders of one slot each, a slot is
    always left over for somebody's second claim), which rules out the
    all-slots-pinned livelock under heavy job oversubscription.
    """

    def __init__(self, index: int, speed: float, tier: CacheTier):
        self.index = index
        self.speed = speed
        self.tier = tier
        self.gate = JobLimiter(max(1, tier.capacity - 1))


class WorkerState:
    def __init__(self, wid: int, rng: Random):
        self.wid = wid
        self.rng = rng
        self.deque = WorkerDeque()
        self.pending_pairs: Optional[deque] = None
        self.steal_attempts_left = 0
        self.idle_rounds = 0


class Job:
    __slots__ = ("pair", "device", "side", "leases", "dev_ticket", "host_ticket",
                 "state", "noslot_tries", "request_id")

    def __init__(self, pair: tuple[int, int], device: int):
        self.pair = pair
        self.device = device
        self.side = 0
        self.leases: list = [None, None]
        self.dev_ticket = None
        self.host_ticket = None
        self.state = "device_acquire"
        self.noslot_tries = 0
        self.request_id: Optional[int] = None

    def key(self) -> int:
        return self.pair[self.side]

    def dump(self) -> str:
        return (f"job{self.pair} dev={self.device} side={self.side} state={self.state} "
                f"leases={[l is not None for l in self.leases]} "
                f"tickets=({self.dev_ticket is not None},{self.host_ticket is not None})")


class NodeCore:
    """All runtime state of one node plus the logic that mutates it."""

    def __init__(self, node_id: int, config: RunConfig, shape: NodeShape,
                 app: Application, engine: EngineHooks):
        self.node_id = node_id
        self.config = config
        self.app = app
        self.engine = engine
        self.p = config.p
        self.host = CacheTier(f"host{node_id}", shape.host_slots, app.slot_size)
        self.devices = [
            DeviceState(idx, speed, CacheTier(f"dev{node_id}.{idx}", shape.device_slots, app.slot_size))
            for idx, speed in enumerate(shape.device_speeds)
        ]
        self.workers = [
            WorkerState(wid, Random(mix64(config.seed, 0x3017, node_id, wid)))
            for wid in range(len(self.devices))
        ]
        self.limiter = JobLimiter(config.job_limit_for(shape))
        self.metrics = NodeMetrics(node=node_id)
        self.active_jobs = 0
        self.stopped = False
        self.host_published: set[int] = set()
        self.jobs: set[Job] = set()

        self.protocol: Optional[FetchProtocol] = None
        if config.dist_cache and self.p > 1:
            self.protocol = FetchProtocol(
                node_id, self.p, config.h,
                host_lookup=self.host.peek,
                send=lambda dst, frame: self.send(dst, frame),
                on_complete=self._remote_complete,
            )
        self._requests: dict[int, Job] = {}
        self._next_request = 0
        self._completion_buffer: list[tuple[int, int, float, Optional[bool]]] = []

        # master-only state
        self.ledger: Optional[PairLedger] = None
        self.results: dict[tuple[int, int], PairResult] = {}
        self.collected: dict[int, NodeMetrics] = {}
        self.makespan: Optional[float] = None
        self._stop_sent = False
        if node_id == 0:
            self.ledger = PairLedger(app.n)

    # -- boot / shutdown -----------------------------------------------------
    def boot(self) -> None:
        if self.node_id == 0:
            root = root_region(self.app.n)
            if root.pair_count() > 0:
                self.workers[0].deque.push(TaskNode(root, 0))
            else:
                self._maybe_finish()
        for worker in self.workers:
            self.engine.defer(self.node_id, lambda w=worker.wid: self.worker_step(w))

    def send(self, dst: int, frame: Frame) -> None:
        name = Kind.NAMES[frame.kind]
        self.metrics.messages_sent[name] = self.metrics.messages_sent.get(name, 0) + 1
        self.engine.send_frame(self.node_id, dst, frame)

    def _handle_stop(self) -> None:
        if self.stopped:
            return
        self.stopped = True
        self.metrics.cache = {self.host.name: self.host.snapshot_stats()}
        for dev in self.devices:
            self.metrics.cache[dev.tier.name] = dev.tier.snapshot_stats()
        if self.node_id == 0:
            self.collected[0] = self.metrics
            self._maybe_all_collected()
        else:
            payload = json.dumps(self.metrics.as_dict()).encode()
            self.send(0, Frame(Kind.NODE_METRICS, origin=self.node_id, payload=payload))

    def _maybe_all_collected(self) -> None:
        if self.node_id == 0 and len(self.collected) == self.p:
            self.engine.master_finished()

    # -- frame handling --------------------------------------------------------
    def handle_frame(self, frame: Frame) -> None:
        kind = frame.kind
        if kind in (Kind.REQUEST, Kind.FORWARD, Kind.DATA, Kind.FAILURE):
            if self.protocol is None:
                raise AssertionError("cache-protocol frame without distributed cache")
            self.protocol.handle(frame)
        elif kind == Kind.STEAL_REQUEST:
            self._serve_steal(frame)
        elif kind == Kind.STEAL_RESPONSE:
            self._steal_response(frame)
        elif kind == Kind.COMPLETIONS:
            self._apply_completions(unpack_completions(frame.payload))
        elif kind == Kind.STOP:
            self._handle_stop()
        elif kind == Kind.NODE_METRICS:
            self.collected[frame.origin] = NodeMetrics.from_dict(json.loads(frame.payload))
            self._maybe_all_collected()
        else:
            raise AssertionError(f"unexpected frame kind {kind}")

    # -- worker policy -----------------------------------------------------------
    def worker_step(self, wid: int) -> None:
        if self.stopped:
            return
        worker = self.workers[wid]
        while True:
            if worker.pending_pairs is not None:
                if not self._submit_pending(worker):
                    return  # parked on the job limiter
            task = worker.deque.pop()
            if task is None:
                task = self._local_steal(worker)
                if task is not None:
                    self.metrics.steals_local += 1
            if task is None:
                if self.p > 1:
                    worker.steal_attempts_left = self.config.steal_retry_remote
                    self._remote_steal(worker)
                else:
                    self._worker_backoff(worker)
                return
            worker.idle_rounds = 0
            if task.region.is_leaf(self.config.leaf_block):
                worker.pending_pairs = deque(task.region.pairs())
                continue
            for child in task.region.split():
                worker.deque.push(TaskNode(child, task.level + 1))

    def _submit_pending(self, worker: WorkerState) -> bool:
        pending = worker.pending_pairs
        while pending:
            if not self.limiter.try_acquire():
                self.limiter.add_waiter(
                    lambda w=worker.wid: self.engine.defer(self.node_id, lambda: self.worker_step(w)))
                return False
            pair = pending.popleft()
            self._start_job(pair, worker.wid)
        worker.pending_pairs = None
        return True

    def _local_steal(self, worker: WorkerState) -> Optional[TaskNode]:
        others = [w for w in self.workers if w.wid != worker.wid]
        if not others:
            return None
        worker.rng.shuffle(others)
        for victim in others[: self.config.steal_retry_local]:
            task = victim.deque.steal()
            if task is not None:
                return task
        return None

    def _remote_steal(self, worker: WorkerState) -> None:
        victim = worker.rng.randrange(self.p - 1)
        victim = victim if victim < self.node_id else victim + 1
        self.send(victim, Frame(Kind.STEAL_REQUEST, origin=self.node_id,
                                payload=pack_steal_request(worker.wid)))

    def _serve_steal(self, frame: Frame) -> None:
        wid = unpack_steal_request(frame.payload)
        task = None
        if not self.stopped:
            task = self._steal_from_node()
        body = None if task is None else (task.level, task.region.as_tuple())
        self.send(frame.origin, Frame(Kind.STEAL_RESPONSE, origin=self.node_id,
                                      payload=pack_steal_response(wid, body)))

    def _steal_from_node(self) -> Optional[TaskNode]:
        best = None
        best_level = None
        for worker in self.workers:
            level = worker.deque.steal_level()
            if level is not None and (best_level is None or level < best_level):
                best, best_level = worker, level
        if best is None:
            return None
        return best.deque.steal()

    def _steal_response(self, frame: Frame) -> None:
        if self.stopped:
            return
        wid, body = unpack_steal_response(frame.payload)
        worker = self.workers[wid]
        if body is not None:
            level, bounds = body
            worker.deque.push(TaskNode(Region(*bounds), level))
            worker.idle_rounds = 0
            self.metrics.steals_remote += 1
            self.engine.defer(self.node_id, lambda: self.worker_step(wid))
            return
        self.metrics.steal_requests_failed += 1
        worker.steal_attempts_left -= 1
        if worker.steal_attempts_left > 0:
            self._remote_steal(worker)
        else:
            self._worker_backoff(worker)

    def _worker_backoff(self, worker: WorkerState) -> None:
        worker.idle_rounds += 1
        delay = IDLE_BACKOFF_BASE * (2 ** min(worker.idle_rounds - 1, 8))
        self.engine.call_later(self.node_id, min(delay, IDLE_BACKOFF_MAX),
                               lambda: self.worker_step(worker.wid))

    # -- job state machine -------------------------------------------------------
    def _start_job(self, pair: tuple[int, int], device: int) -> None:
        self.metrics.submitted += 1
        self.active_jobs += 1
        job = Job(pair, device)
        self.jobs.add(job)
        self._enter_device_phase(job)

    def _enter_device_phase(self, job: Job) -> None:
        gate = self.devices[job.device].gate
        if gate.try_acquire():
            self._drive(job)
        else:
            job.state = "gate_wait"
            gate.add_waiter(
                lambda: self.engine.defer(self.node_id,
                                          lambda: self._enter_device_phase(job)))

    def _drive(self, job: Job) -> None:
        """Bring the current side's key to device-tier residency."""
        key = job.key()
        tier = self.devices[job.device].tier
        job.state = "device_acquire"
        try:
            res = tier.acquire(key)
        except NoEvictableSlot:
            self._noslot(job, self._drive)
            return
        if isinstance(res, Hit):
            job.leases[job.side] = res.lease
            self._side_ready(job)
        elif isinstance(res, MustWait):
            job.state = "device_wait"
            res.token.on_ready(
                lambda: self.engine.defer(self.node_id, lambda: self._drive(job)))
        else:
            job.dev_ticket = res.ticket
            self._host_acquire(job)

    def _host_acquire(self, job: Job) -> None:
        key = job.key()
        job.state = "host_acquire"
        try:
            res = self.host.acquire(key)
        except NoEvictableSlot:
            self._noslot(job, self._host_acquire)
            return
        if isinstance(res, Hit):
            self._upload_to_device(job, res.lease.data, host_lease=res.lease)
        elif isinstance(res, MustWait):
            job.state = "host_wait"
            res.token.on_ready(
                lambda: self.engine.defer(self.node_id, lambda: self._host_acquire(job)))
        else:
            job.host_ticket = res.ticket
            if self.protocol is not None:
                self._begin_remote(job)
            else:
                self._local_load(job)

    # -- remote fetch ----------------------------------------------------------
    def _begin_remote(self, job: Job) -> None:
        self._next_request += 1
        rid = self._next_request * self.p + self.node_id
        job.request_id = rid
        job.state = "remote_wait"
        self._requests[rid] = job
        self.metrics.remote_requests += 1
        self.protocol.begin_fetch(rid, job.key())
        self.engine.call_later(self.node_id, self.config.remote_timeout,
                               lambda: self._remote_timeout(rid))

    def _remote_complete(self, rid: int, key: int, item: Optional[ItemData],
                         hop: Optional[int]) -> None:
        job = self._requests.pop(rid, None)
        if job is None:
            return
        job.request_id = None
        if item is None:
            self.metrics.remote_failures += 1
            self._local_load(job)
            return
        hits = self.metrics.remote_hits_by_hop
        hits[hop] = hits.get(hop, 0) + 1
        # host first so remote peers can in turn be served from this node
        self.host_published.add(key)
        host_lease = self.host.publish(job.host_ticket, item, retain=True)
        job.host_ticket = None
        self._upload_to_device(job, item, host_lease=host_lease)

    def _remote_timeout(self, rid: int) -> None:
        job = self._requests.pop(rid, None)
        if job is None:
            return
        self.protocol.cancel(rid)
        self.metrics.remote_timeouts += 1
        job.request_id = None
        self._local_load(job)

    # -- local load pipeline -----------------------------------------------------
    def _local_load(self, job: Job) -> None:
        key = job.key()
        job.state = "io"
        path = self.app.path_for_key(key)
        self.engine.io_read(self.node_id, job.pair, key, path,
                            lambda blob: self._after_io(job, blob))

    def _after_io(self, job: Job, blob: bytes) -> None:
        key = job.key()
        self.metrics.loads += 1
        self.metrics.load_counts[key] = self.metrics.load_counts.get(key, 0) + 1
        size = self.app.raw_size(key)
        self.metrics.io_bytes += size
        raw = ItemData(Stage.RAW_FILE, blob, sim_bytes=size)
        job.state = "parse"
        self.engine.run_stage(
            self.node_id, "cpu", 0, "parse", job.pair, self._cost("parse", key),
            lambda: self.app.parse(key, raw),
            lambda parsed: self._after_parse(job, parsed))

    def _after_parse(self, job: Job, parsed: ItemData) -> None:
        self.metrics.parses += 1
        job.state = "upload_raw"
        self.engine.run_stage(
            self.node_id, "up", job.device, "upload", job.pair,
            self._transfer_cost(parsed), lambda: parsed,
            lambda data: self._after_upload_for_load(job, data))

    def _after_upload_for_load(self, job: Job, parsed: ItemData) -> None:
        key = job.key()
        dev = self.devices[job.device]
        job.state = "preprocess"
        self.engine.run_stage(
            self.node_id, "gpu", job.device, "preprocess", job.pair,
            self._cost("preprocess", key, speed=dev.speed),
            lambda: self.app.preprocess(key, parsed),
            lambda item: self._after_preprocess(job, item))

    def _after_preprocess(self, job: Job, item: ItemData) -> None:
        self.metrics.preprocesses += 1
        job.state = "writeback"
        self.engine.run_stage(
            self.node_id, "down", job.device, "writeback", job.pair,
            self._transfer_cost(item), lambda: item,
            lambda data: self._after_writeback(job, data))

    def _after_writeback(self, job: Job, item: ItemData) -> None:
        key = job.key()
        self.host_published.add(key)
        self.host.publish(job.host_ticket, item)
        job.host_ticket = None
        self._publish_device(job, item)

    # -- device publication ------------------------------------------------------
    def _upload_to_device(self, job: Job, item: ItemData, host_lease) -> None:
        job.state = "upload"
        self.engine.run_stage(
            self.node_id, "up", job.device, "upload", job.pair,
            self._transfer_cost(item), lambda: item,
            lambda data: self._after_upload(job, data, host_lease))

    def _after_upload(self, job: Job, item: ItemData, host_lease) -> None:
        host_lease.release()
        self._publish_device(job, item)

    def _publish_device(self, job: Job, item: ItemData) -> None:
        key = job.key()
        assert key in self.host_published, "device publish before host publish"
        tier = self.devices[job.device].tier
        lease = tier.publish(job.dev_ticket, item, retain=True)
        job.dev_ticket = None
        job.leases[job.side] = lease
        self._side_ready(job)

    def _side_ready(self, job: Job) -> None:
        job.noslot_tries = 0
        if job.side == 0:
            job.side = 1
            self._drive(job)
        else:
            self._compare(job)

    # -- comparison pipeline -----------------------------------------------------
    def _compare(self, job: Job) -> None:
        i, j = job.pair
        dev = self.devices[job.device]
        left, right = job.leases
        job.state = "compare"
        self.engine.run_stage(
            self.node_id, "gpu", job.device, "compare", job.pair,
            self._cost("compare", i, j, speed=dev.speed),
            lambda: self.app.compare((i, left.data), (j, right.data)),
            lambda raw: self._after_compare(job, raw))

    def _after_compare(self, job: Job, raw: bytes) -> None:
        self.metrics.comparisons += 1
        for lease in job.leases:
            lease.release()
        job.leases = [None, None]
        job.state = "download"
        self.engine.run_stage(
            self.node_id, "down", job.device, "download", job.pair,
            len(raw) / self.config.transfer_bandwidth, lambda: raw,
            lambda data: self._after_download(job, data))

    def _after_download(self, job: Job, raw: bytes) -> None:
        i, j = job.pair
        job.state = "postprocess"
        self.engine.run_stage(
            self.node_id, "cpu", 0, "postprocess", job.pair,
            self._cost("postprocess", i, j),
            lambda: self.app.postprocess(job.pair, raw),
            lambda result: self._complete(job, result))

    def _complete(self, job: Job, result: PairResult) -> None:
        self.jobs.discard(job)
        self.devices[job.device].gate.release()
        self.active_jobs -= 1
        self.metrics.finish_time = self.engine.now()
        entry = (result.left, result.right, result.value, result.match)
        if self.node_id == 0:
            self._apply_completions([entry])
        else:
            self._completion_buffer.append(entry)
            if len(self._completion_buffer) >= COMPLETION_FLUSH or self.active_jobs == 0:
                self._flush_completions()
        self.limiter.release()

    def _flush_completions(self) -> None:
        if not self._completion_buffer:
            return
        payload = pack_completions(self._completion_buffer)
        self._completion_buffer = []
        self.send(0, Frame(Kind.COMPLETIONS, origin=self.node_id, payload=payload))

    def _apply_completions(self, entries) -> None:
        assert self.ledger is not None
        for i, j, value, match in entries:
            self.ledger.mark(i, j)
            if self.config.keep_results:
                self.results[(i, j)] = PairResult(i, j, value, match)
        self._maybe_finish()

    def _maybe_finish(self) -> None:
        if self.ledger.full and not self._stop_sent:
            self._stop_sent = True
            self.makespan = self.engine.now()
            for dst in range(1, self.p):
                self.send(dst, Frame(Kind.STOP))
            self._handle_stop()

    # -- helpers -------------------------------------------------------------
    def _noslot(self, job: Job, retry: Callable[[Job], None]) -> None:
        self.metrics.noslot_retries += 1
        job.noslot_tries += 1
        if job.noslot_tries > NOSLOT_RESTART_TRIES and job.side == 1:
            # escape hatch for all-slots-pinned livelock: drop what we hold
            # and redo the pair from its first key
            if job.leases[0] is not None:
                job.leases[0].release()
                job.leases[0] = None
            if job.dev_ticket is not None:
                self.devices[job.device].tier.abort(job.dev_ticket)
                job.dev_ticket = None
            if job.host_ticket is not None:
                self.host.abort(job.host_ticket)
                job.host_ticket = None
            job.side = 0
            job.noslot_tries = 0
            self.engine.call_later(self.node_id, NOSLOT_MAX_DELAY,
                                   lambda: self._drive(job))
            return
        delay = NOSLOT_BASE_DELAY * (2 ** min(job.noslot_tries - 1, 8))
        self.engine.call_later(self.node_id, min(delay, NOSLOT_MAX_DELAY),
                               lambda: retry(job))

    def _cost(self, stage: str, i: int, j: Optional[int] = None, speed: float = 1.0) -> float:
        cost = self.app.stage_cost(stage, i, j)
        if cost is None:
            cost = NOMINAL_COSTS[stage]
        return cost / speed

    def _transfer_cost(self, item: ItemData) -> float:
        return item.sim_bytes / self.config.transfer_bandwidth

    def dump_state(self) -> str:
        lines = [f"node {self.node_id}: active_jobs={self.active_jobs} stopped={self.stopped}"]
        lines += ["  " + job.dump() for job in self.jobs]
        if self.ledger is not None:
            lines.append(f"  ledger {self.ledger.completed}/{self.ledger.total}")
        return "\n".join(lines)
