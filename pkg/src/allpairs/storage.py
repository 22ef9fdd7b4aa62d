"""Shared storage server abstraction.

All nodes read raw items from one logical store with an aggregate
bandwidth cap and a per-request latency. Real mode throttles actual reads
through a token bucket; simulation mode models the cap as a fair-share
pipe where k concurrent transfers each progress at cap/k.
"""

from __future__ import annotations

import math
import threading
import time
from typing import Callable

from .apps import Application
from .errors import StorageNotFound


class StorageCatalog:
    """Read-only path -> content mapping backed by an application.

    Content is materialized lazily and memoized so repeated reads are
    byte-identical by construction.
    """

    def __init__(self, app: Application):
        self._app = app
        self._paths = {app.path_for_key(key): key for key in range(app.n)}
        self._blobs: dict[str, bytes] = {}
        self._lock = threading.Lock()

    def size_of(self, path: str) -> int:
        key = self._lookup(path)
        return self._app.raw_size(key)

    def read(self, path: str) -> bytes:
        self._lookup(path)
        with self._lock:
            blob = self._blobs.get(path)
        if blob is None:
            blob = self._app.fetch_raw(path)
            with self._lock:
                blob = self._blobs.setdefault(path, blob)
        return blob

    def _lookup(self, path: str) -> int:
        try:
            return self._paths[path]
        except KeyError:
            raise StorageNotFound(path) from None


class TokenBucket:
    """Real-time rate limiter: acquire(bytes) sleeps until tokens accrue.

    Tokens may go negative (borrowing), so a single request larger than the
    bucket capacity still goes through while throttling the average rate.
    """

    def __init__(self, rate: float, capacity: float | None = None):
        if rate <= 0:
            raise ValueError("rate must be positive")
        self.rate = rate
        self.capacity = capacity if capacity is not None else rate
        self._tokens = self.capacity
        self._last = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self, amount: float) -> None:
        if math.isinf(self.rate):
            return
        with self._lock:
            now = time.monotonic()
            self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
            self._last = now
            self._tokens -= amount
            deficit = -self._tokens
        if deficit > 0:
            time.sleep(deficit / self.rate)


class FairSharePipe:
    """Discrete-event model of a shared pipe with aggregate capacity.

    Concurrent transfers split the bandwidth evenly, so two saturating
    reads each take at least twice as long as either would alone. The
    caller injects the event scheduler: ``schedule(when, fn)`` must run fn
    at simulated time `when` and ``now()`` reports current simulated time.
    """

    _EPS = 1e-6  # residual bytes treated as complete

    def __init__(self, rate: float, latency: float,
                 schedule: Callable[[float, Callable[[], None]], None],
                 now: Callable[[], float]):
        if rate <= 0:
            raise ValueError("rate must be positive")
        self.rate = rate
        self.latency = latency
        self._schedule = schedule
        self._now = now
        self._active: dict[int, tuple[float, Callable[[], None]]] = {}
        self._next_id = 0
        self._last_update = 0.0
        self._event_version = 0

    def request(self, size: float, on_done: Callable[[], None]) -> None:
        """Start a transfer; on_done fires when its bytes have drained."""
        self._next_id += 1
        rid = self._next_id
        if self.latency > 0:
            self._schedule(self._now() + self.latency, lambda: self._join(rid, size, on_done))
        else:
            self._join(rid, size, on_done)

    def _join(self, rid: int, size: float, on_done: Callable[[], None]) -> None:
        if math.isinf(self.rate) or size <= 0:
            on_done()
            return
        self._advance()
        self._active[rid] = (float(size), on_done)
        self._reschedule()

    def _advance(self) -> None:
        now = self._now()
        if self._active:
            drained = (now - self._last_update) * self.rate / len(self._active)
            self._active = {
                rid: (remaining - drained, cb)
                for rid, (remaining, cb) in self._active.items()
            }
        self._last_update = now

    def _reschedule(self) -> None:
        self._event_version += 1
        if not self._active:
            return
        version = self._event_version
        share = self.rate / len(self._active)
        next_in = min(remaining for remaining, _ in self._active.values()) / share
        self._schedule(self._now() + max(next_in, 0.0), lambda: self._fire(version))

    def _fire(self, version: int) -> None:
        if version != self._event_version:
            return  # superseded by a later join/completion
        self._advance()
        finished = [rid for rid, (remaining, _) in self._active.items()
                    if remaining <= self._EPS]
        callbacks = [self._active.pop(rid)[1] for rid in finished]
        self._reschedule()
        for cb in callbacks:
            cb()
