"""Length-prefixed binary frames shared by all transports.

Every message between nodes uses one layout:

    u32  length     -- bytes after this field
    u8   kind
    u64  request_id
    u64  key
    u16  origin     -- node id the reply (if any) should reach
    u16  candidate_count
    u16  x count    -- candidate node ids
    [u32 checksum, payload]  -- present only when the frame carries a payload;
                                checksum is CRC-32 of the payload bytes

Cache-data payloads are `u16 hop, u64 logical_size, item bytes`; probe
payloads are `u16 hop`. Steal and completion payloads are documented next
to their pack helpers below. All integers are little-endian.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

from .apps import ItemData, Stage
from .errors import TransportError


class Kind:
    REQUEST = 1
    FORWARD = 2
    DATA = 3
    FAILURE = 4
    STEAL_REQUEST = 5
    STEAL_RESPONSE = 6
    COMPLETIONS = 7
    NODE_METRICS = 8
    STOP = 9
    HELLO = 10
    MESH_READY = 11
    START = 12
    FINAL = 13

    NAMES = {
        1: "request", 2: "forward", 3: "data", 4: "failure",
        5: "steal_request", 6: "steal_response", 7: "completions",
        8: "node_metrics", 9: "stop", 10: "hello", 11: "mesh_ready",
        12: "start", 13: "final",
    }


_HEADER = struct.Struct("<BQQHH")
_LEN = struct.Struct("<I")
_CRC = struct.Struct("<I")
_CAND = struct.Struct("<H")


@dataclass
class Frame:
    kind: int
    request_id: int = 0
    key: int = 0
    origin: int = 0
    candidates: tuple[int, ...] = ()
    payload: bytes = b""

    @property
    def checksum(self) -> int:
        return zlib.crc32(self.payload)

    def wire_size(self) -> int:
        size = _LEN.size + _HEADER.size + _CAND.size * len(self.candidates)
        if self.payload:
            size += _CRC.size + len(self.payload)
        return size


def encode(frame: Frame) -> bytes:
    body = bytearray(_HEADER.pack(frame.kind, frame.request_id, frame.key,
                                  frame.origin, len(frame.candidates)))
    for cand in frame.candidates:
        body += _CAND.pack(cand)
    if frame.payload:
        body += _CRC.pack(frame.checksum)
        body += frame.payload
    return _LEN.pack(len(body)) + bytes(body)


def decode_body(body: bytes) -> Frame:
    """Decode a frame body (everything after the length prefix)."""
    if len(body) < _HEADER.size:
        raise TransportError(f"frame body too short: {len(body)} bytes")
    kind, request_id, key, origin, count = _HEADER.unpack_from(body, 0)
    off = _HEADER.size
    if len(body) < off + count * _CAND.size:
        raise TransportError("frame truncated in candidate list")
    candidates = tuple(
        _CAND.unpack_from(body, off + i * _CAND.size)[0] for i in range(count)
    )
    off += count * _CAND.size
    payload = b""
    if off < len(body):
        if len(body) - off < _CRC.size:
            raise TransportError("frame truncated before checksum")
        (crc,) = _CRC.unpack_from(body, off)
        payload = body[off + _CRC.size:]
        if zlib.crc32(payload) != crc:
            raise TransportError("payload checksum mismatch")
    return Frame(kind, request_id, key, origin, candidates, payload)


# -- payload helpers ----------------------------------------------------------

_HOP = struct.Struct("<H")
_DATA_HEAD = struct.Struct("<HQ")
_STEAL_REQ = struct.Struct("<H")
_STEAL_RESP = struct.Struct("<HBHIIII")
_COMPL_HEAD = struct.Struct("<I")
_COMPL_ENTRY = struct.Struct("<IIdB")


def pack_probe(hop: int) -> bytes:
    return _HOP.pack(hop)


def unpack_probe(payload: bytes) -> int:
    return _HOP.unpack(payload)[0]


def pack_item(hop: int, item: ItemData) -> bytes:
    return _DATA_HEAD.pack(hop, item.sim_bytes) + item.payload


def unpack_item(payload: bytes) -> tuple[int, ItemData]:
    hop, sim_bytes = _DATA_HEAD.unpack_from(payload, 0)
    return hop, ItemData(Stage.PREPROCESSED, payload[_DATA_HEAD.size:], sim_bytes=sim_bytes)


def pack_steal_request(worker: int) -> bytes:
    return _STEAL_REQ.pack(worker)


def unpack_steal_request(payload: bytes) -> int:
    return _STEAL_REQ.unpack(payload)[0]


def pack_steal_response(worker: int, task) -> bytes:
    """task is None or (level, (r0, r1, c0, c1))."""
    if task is None:
        return _STEAL_RESP.pack(worker, 0, 0, 0, 0, 0, 0)
    level, (r0, r1, c0, c1) = task
    return _STEAL_RESP.pack(worker, 1, level, r0, r1, c0, c1)


def unpack_steal_response(payload: bytes):
    worker, has_task, level, r0, r1, c0, c1 = _STEAL_RESP.unpack(payload)
    if not has_task:
        return worker, None
    return worker, (level, (r0, r1, c0, c1))


def pack_completions(entries) -> bytes:
    """entries: iterable of (i, j, value, match) with match in {None, False, True}."""
    out = bytearray(_COMPL_HEAD.pack(len(entries)))
    for i, j, value, match in entries:
        flags = 0 if match is None else (1 | (2 if match else 0))
        out += _COMPL_ENTRY.pack(i, j, value, flags)
    return bytes(out)


def unpack_completions(payload: bytes):
    (count,) = _COMPL_HEAD.unpack_from(payload, 0)
    off = _COMPL_HEAD.size
    entries = []
    for _ in range(count):
        i, j, value, flags = _COMPL_ENTRY.unpack_from(payload, off)
        off += _COMPL_ENTRY.size
        match = None if not flags & 1 else bool(flags & 2)
        entries.append((i, j, value, match))
    return entries
