"""Third-level cache: fetch preprocessed items from remote host caches.

Every key has a fixed point-of-contact node (key mod p) that never stores
the item itself; it only remembers which nodes recently asked for it. A
fetch goes to the point of contact, which forwards it along the chain of
recent requesters; whoever holds the item replies straight to the origin.
A full-length chain costs at most h+2 messages; any miss along the way
ends in a direct failure reply and the origin loads the item locally.
"""

from __future__ import annotations

from typing import Callable, Optional

from .apps import ItemData, ItemKey
from .wire import Frame, Kind, pack_item, pack_probe, unpack_item, unpack_probe


def owner_of(key: ItemKey, p: int) -> int:
    """Point-of-contact node for a key."""
    if p < 1:
        raise ValueError("node count must be >= 1")
    return key % p


class CandidateDirectory:
    """Recent requesters per owned key, most recent first, capped at h_max."""

    def __init__(self, node_id: int, p: int, h_max: int):
        self.node_id = node_id
        self.p = p
        self.h_max = h_max
        self.table: dict[ItemKey, list[int]] = {}

    def record_and_snapshot(self, key: ItemKey, origin: int, h: int) -> list[int]:
        """Chain of up to h candidates for a request, recording its origin.

        The origin is prepended even when the chain is empty so the next
        request for the key finds it.
        """
        assert owner_of(key, self.p) == self.node_id, "request routed to wrong owner"
        entry = self.table.get(key, [])
        chain = entry[:h]
        updated = [origin] + [c for c in entry if c != origin]
        self.table[key] = updated[: self.h_max]
        return chain


class FetchProtocol:
    """Per-node protocol state machine for remote-cache lookups.

    Effects are injected so the same logic runs inside the runtime and in
    protocol-level tests: ``host_lookup`` peeks the local host tier without
    pinning, ``send`` transmits a frame, and ``on_complete(request_id, key,
    item_or_none, hop_or_none)`` resumes the waiting job at the origin.
    """

    def __init__(self, node_id: int, p: int, h: int, *,
                 host_lookup: Callable[[ItemKey], Optional[ItemData]],
                 send: Callable[[int, Frame], None],
                 on_complete: Callable[[int, ItemKey, Optional[ItemData], Optional[int]], None],
                 h_max: int | None = None):
        if h < 0:
            raise ValueError("hop budget must be >= 0")
        self.node_id = node_id
        self.p = p
        self.h = h
        self.directory = CandidateDirectory(node_id, p, h_max if h_max is not None else max(h, 4))
        self._host_lookup = host_lookup
        self._send = send
        self._on_complete = on_complete
        self.outstanding: dict[int, ItemKey] = {}

    # -- origin side ---------------------------------------------------------
    def begin_fetch(self, request_id: int, key: ItemKey) -> None:
        self.outstanding[request_id] = key
        self._dispatch(owner_of(key, self.p),
                       Frame(Kind.REQUEST, request_id=request_id, key=key, origin=self.node_id))

    def cancel(self, request_id: int) -> None:
        """Forget a request (timeout); a late reply is dropped silently."""
        self.outstanding.pop(request_id, None)

    # -- message handling ------------------------------------------------------
    def handle(self, frame: Frame) -> None:
        if frame.kind == Kind.REQUEST:
            self._handle_request(frame)
        elif frame.kind == Kind.FORWARD:
            self._handle_probe(frame)
        elif frame.kind == Kind.DATA:
            self._handle_data(frame)
        elif frame.kind == Kind.FAILURE:
            self._handle_failure(frame)
        else:
            raise ValueError(f"not a cache-protocol frame: kind {frame.kind}")

    def _handle_request(self, frame: Frame) -> None:
        chain = self.directory.record_and_snapshot(frame.key, frame.origin, self.h)
        if not chain:
            self._dispatch(frame.origin, Frame(
                Kind.FAILURE, request_id=frame.request_id, key=frame.key, origin=frame.origin))
            return
        self._dispatch(chain[0], Frame(
            Kind.FORWARD, request_id=frame.request_id, key=frame.key, origin=frame.origin,
            candidates=tuple(chain[1:]), payload=pack_probe(1)))

    def _handle_probe(self, frame: Frame) -> None:
        hop = unpack_probe(frame.payload)
        item = self._host_lookup(frame.key)
        if item is not None:
            self._dispatch(frame.origin, Frame(
                Kind.DATA, request_id=frame.request_id, key=frame.key, origin=frame.origin,
                payload=pack_item(hop, item)))
        elif frame.candidates:
            self._dispatch(frame.candidates[0], Frame(
                Kind.FORWARD, request_id=frame.request_id, key=frame.key, origin=frame.origin,
                candidates=frame.candidates[1:], payload=pack_probe(hop + 1)))
        else:
            self._dispatch(frame.origin, Frame(
                Kind.FAILURE, request_id=frame.request_id, key=frame.key, origin=frame.origin))

    def _handle_data(self, frame: Frame) -> None:
        key = self.outstanding.pop(frame.request_id, None)
        if key is None:
            return  # timed out or duplicate; drop
        hop, item = unpack_item(frame.payload)
        self._on_complete(frame.request_id, key, item, hop)

    def _handle_failure(self, frame: Frame) -> None:
        key = self.outstanding.pop(frame.request_id, None)
        if key is None:
            return
        self._on_complete(frame.request_id, key, None, None)

    def _dispatch(self, dst: int, frame: Frame) -> None:
        # messages to self are handled in place; they cost no network traffic
        if dst == self.node_id:
            self.handle(frame)
        else:
            self._send(dst, frame)
