import pytest
from hypothesis import given, strategies as st

from allpairs.apps import ItemData, Stage
from allpairs.errors import TransportError
from allpairs.wire import (
    Frame,
    Kind,
    decode_body,
    encode,
    pack_completions,
    pack_item,
    pack_probe,
    pack_steal_request,
    pack_steal_response,
    unpack_completions,
    unpack_item,
    unpack_probe,
    unpack_steal_request,
    unpack_steal_response,
)


def roundtrip(frame: Frame) -> Frame:
    blob = encode(frame)
    length = int.from_bytes(blob[:4], "little")
    assert length == len(blob) - 4
    assert len(blob) == frame.wire_size()
    return decode_body(blob[4:])


@given(
    kind=st.integers(min_value=1, max_value=13),
    request_id=st.integers(min_value=0, max_value=2**64 - 1),
    key=st.integers(min_value=0, max_value=2**64 - 1),
    origin=st.integers(min_value=0, max_value=2**16 - 1),
    candidates=st.lists(st.integers(min_value=0, max_value=2**16 - 1), max_size=8),
    payload=st.binary(max_size=256),
)
def test_frame_roundtrip(kind, request_id, key, origin, candidates, payload):
    frame = Frame(kind, request_id, key, origin, tuple(candidates), payload)
    back = roundtrip(frame)
    assert back == frame


def test_corrupt_payload_rejected():
    frame = Frame(Kind.DATA, payload=b"hello world")
    blob = bytearray(encode(frame))
    blob[-1] ^= 0xFF
    with pytest.raises(TransportError, match="checksum"):
        decode_body(bytes(blob[4:]))


def test_truncated_frames_rejected():
    frame = Frame(Kind.FORWARD, candidates=(1, 2, 3), payload=b"xy")
    blob = encode(frame)
    with pytest.raises(TransportError):
        decode_body(blob[4:10])
    with pytest.raises(TransportError):
        decode_body(b"")


def test_item_payload_roundtrip():
    item = ItemData(Stage.PREPROCESSED, b"payload-bytes", sim_bytes=1 << 20)
    hop, back = unpack_item(pack_item(3, item))
    assert hop == 3
    assert back.payload == item.payload
    assert back.sim_bytes == 1 << 20
    assert back.stage is Stage.PREPROCESSED


def test_probe_payload_roundtrip():
    assert unpack_probe(pack_probe(2)) == 2


def test_steal_payloads():
    assert unpack_steal_request(pack_steal_request(3)) == 3
    assert unpack_steal_response(pack_steal_response(1, None)) == (1, None)
    worker, task = unpack_steal_response(pack_steal_response(2, (4, (0, 8, 8, 16))))
    assert worker == 2
    assert task == (4, (0, 8, 8, 16))


def test_completions_payload():
    entries = [(0, 1, 0.25, None), (3, 9, 1.0, True), (2, 4, 0.0, False)]
    assert unpack_completions(pack_completions(entries)) == entries
    assert unpack_completions(pack_completions([])) == []


def test_wire_size_examples():
    # header-only frame: 4 + 21 bytes
    assert Frame(Kind.STOP).wire_size() == 25
    # one candidate adds 2, payload adds 4 + len
    assert Frame(Kind.FORWARD, candidates=(7,), payload=b"ab").wire_size() == 25 + 2 + 6
