"""Slot cache used for the device and host tiers.

A tier owns a fixed number of fixed-size slots. Each slot is either empty,
being written by exactly one producer, or readable with a pinned reader
count. Lookups either hit (reader pinned), find a write in progress (caller
parks until the producer publishes), or claim a slot for writing after
evicting the least-recently-used unpinned entry.

All operations are atomic under one lock per tier; leases and tickets may
be resolved from a different thread than the one that acquired them.
"""

from __future__ import annotations

import enum
import threading
from typing import Callable, Optional

from .apps import ItemData, ItemKey
from .errors import NoEvictableSlot, SlotOverflow


class SlotState(enum.Enum):
    EMPTY = "empty"
    WRITE = "write"
    READ = "read"


class CacheSlot:
    __slots__ = ("index", "key", "state", "readers", "lru_stamp", "data", "waiters")

    def __init__(self, index: int):
        self.index = index
        self.key: Optional[ItemKey] = None
        self.state = SlotState.EMPTY
        self.readers = 0
        self.lru_stamp = 0
        self.data: Optional[ItemData] = None
        self.waiters: list[WaitToken] = []


class ReadLease:
    """Pins a slot in READ state; the slot cannot be evicted while held."""

    __slots__ = ("tier", "slot", "key", "_live")

    def __init__(self, tier: "CacheTier", slot: CacheSlot, key: ItemKey):
        self.tier = tier
        self.slot = slot
        self.key = key
        self._live = True

    @property
    def data(self) -> ItemData:
        assert self._live, "lease used after release"
        return self.slot.data

    def release(self) -> None:
        self.tier.release(self)


class WriteTicket:
    """Exclusive right to fill a slot; must end in publish() or abort()."""

    __slots__ = ("tier", "slot", "key", "_live")

    def __init__(self, tier: "CacheTier", slot: CacheSlot, key: ItemKey):
        self.tier = tier
        self.slot = slot
        self.key = key
        self._live = True


class WaitToken:
    """Handed out when another producer is already writing the key.

    The holder either registers a callback (event-driven callers) or blocks
    on wait(); both fire once the producer publishes or aborts.
    """

    __slots__ = ("key", "_event", "_callbacks", "_fired", "_lock")

    def __init__(self, key: ItemKey, lock: threading.RLock):
        self.key = key
        self._event = threading.Event()
        self._callbacks: list[Callable[[], None]] = []
        self._fired = False
        self._lock = lock

    def on_ready(self, callback: Callable[[], None]) -> None:
        with self._lock:
            if self._fired:
                fire_now = True
            else:
                self._callbacks.append(callback)
                fire_now = False
        if fire_now:
            callback()

    def wait(self, timeout: float | None = None) -> bool:
        return self._event.wait(timeout)

    def _fire(self) -> list[Callable[[], None]]:
        # caller holds the tier lock; callbacks are invoked outside it
        self._fired = True
        self._event.set()
        callbacks, self._callbacks = self._callbacks, []
        return callbacks


class Hit:
    __slots__ = ("lease",)

    def __init__(self, lease: ReadLease):
        self.lease = lease


class MustWait:
    __slots__ = ("token",)

    def __init__(self, token: WaitToken):
        self.token = token


class Miss:
    __slots__ = ("ticket",)

    def __init__(self, ticket: WriteTicket):
        self.ticket = ticket


def slots_for_bytes(total_bytes: int, slot_size: int) -> int:
    """Capacity in slots for a byte budget (floor division)."""
    if slot_size <= 0:
        raise ValueError("slot_size must be positive")
    return total_bytes // slot_size


class CacheTier:
    """One cache level: a fixed array of slots plus a key index."""

    def __init__(self, name: str, capacity: int, slot_size: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1 slot")
        self.name = name
        self.capacity = capacity
        self.slot_size = slot_size
        self.slots = [CacheSlot(i) for i in range(capacity)]
        self.index: dict[ItemKey, CacheSlot] = {}
        self._free = list(reversed(range(capacity)))
        self._lock = threading.RLock()
        self._stamp = 0
        self.hits = 0
        self.misses = 0
        self.waits = 0
        self.evictions = 0

    # -- operations ----------------------------------------------------------
    def acquire(self, key: ItemKey) -> Hit | MustWait | Miss:
        """Look up a key: Hit pins a reader, Miss claims a slot for writing.

        Raises NoEvictableSlot when the key is absent and every slot is
        pinned by a writer or readers; callers back off and retry.
        """
        with self._lock:
            slot = self.index.get(key)
            if slot is not None:
                if slot.state is SlotState.READ:
                    self.hits += 1
                    slot.readers += 1
                    slot.lru_stamp = self._next_stamp()
                    return Hit(ReadLease(self, slot, key))
                assert slot.state is SlotState.WRITE
                self.waits += 1
                token = WaitToken(key, self._lock)
                slot.waiters.append(token)
                return MustWait(token)
            slot = self._claim_slot()
            self.misses += 1
            slot.key = key
            slot.state = SlotState.WRITE
            slot.readers = 0
            slot.data = None
            slot.lru_stamp = self._next_stamp()
            self.index[key] = slot
            return Miss(WriteTicket(self, slot, key))

    def publish(self, ticket: WriteTicket, data: ItemData, retain: bool = False
                ) -> Optional[ReadLease]:
        """Fill the ticket's slot and wake all waiters for the key.

        With retain=True the slot is published with one reader already
        pinned and the matching lease is returned, so hot-path callers can
        use the data without racing an eviction.
        """
        if data.sim_bytes > self.slot_size:
            raise SlotOverflow(
                f"{data.sim_bytes} bytes exceed {self.name} slot size {self.slot_size}")
        with self._lock:
            assert ticket._live, "ticket already resolved"
            slot = ticket.slot
            assert slot.state is SlotState.WRITE and slot.key == ticket.key
            ticket._live = False
            slot.data = data
            slot.state = SlotState.READ
            lease = None
            if retain:
                slot.readers = 1
                lease = ReadLease(self, slot, ticket.key)
            callbacks = self._drain_waiters(slot)
        for cb in callbacks:
            cb()
        return lease

    def abort(self, ticket: WriteTicket) -> None:
        """Give up on a write: the slot returns to empty and waiters retry."""
        with self._lock:
            assert ticket._live, "ticket already resolved"
            slot = ticket.slot
            assert slot.state is SlotState.WRITE and slot.key == ticket.key
            ticket._live = False
            del self.index[slot.key]
            slot.key = None
            slot.state = SlotState.EMPTY
            slot.data = None
            self._free.append(slot.index)
            callbacks = self._drain_waiters(slot)
        for cb in callbacks:
            cb()

    def release(self, lease: ReadLease) -> None:
        with self._lock:
            assert lease._live, "double release of a read lease"
            lease._live = False
            slot = lease.slot
            assert slot.state is SlotState.READ and slot.readers > 0
            slot.readers -= 1
            slot.lru_stamp = self._next_stamp()

    def peek(self, key: ItemKey) -> Optional[ItemData]:
        """Data for a key if currently readable, else None (no pinning).

        Safe because published payloads are immutable; used by remote-cache
        probes which must not block or pin.
        """
        with self._lock:
            slot = self.index.get(key)
            if slot is not None and slot.state is SlotState.READ:
                return slot.data
            return None

    def snapshot_stats(self) -> dict[str, int]:
        with self._lock:
            return {
                "hits": self.hits,
                "misses": self.misses,
                "waits": self.waits,
                "evictions": self.evictions,
                "occupancy": len(self.index),
            }

    # -- internals ---------------------------------------------------------
    def _next_stamp(self) -> int:
        self._stamp += 1
        return self._stamp

    def _claim_slot(self) -> CacheSlot:
        if self._free:
            return self.slots[self._free.pop()]
        victim: Optional[CacheSlot] = None
        for slot in self.slots:
            if slot.state is SlotState.READ and slot.readers == 0:
                if victim is None or slot.lru_stamp < victim.lru_stamp:
                    victim = slot
        if victim is None:
            raise NoEvictableSlot(f"all {self.capacity} slots of {self.name} are pinned")
        del self.index[victim.key]
        victim.key = None
        victim.data = None
        victim.state = SlotState.EMPTY
        self.evictions += 1
        return victim

    @staticmethod
    def _drain_waiters(slot: CacheSlot) -> list[Callable[[], None]]:
        callbacks: list[Callable[[], None]] = []
        waiters, slot.waiters = slot.waiters, []
        for token in waiters:
            callbacks.extend(token._fire())
        return callbacks
