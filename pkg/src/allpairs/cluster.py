"""Socket transport for multi-process clusters.

Static membership: rank r listens on its own address and dials every lower
rank, so each node pair shares exactly one TCP connection carrying
length-prefixed frames in FIFO order. Rank 0 coordinates a start barrier
(everyone reports a complete mesh, rank 0 broadcasts the go-ahead). Any
channel failure aborts the run; there is no reconnection.
"""

from __future__ import annotations

import queue
import socket
import struct
import threading
import time
from typing import Callable, Optional

from .errors import ConnectFailure, TransportError
from .wire import Frame, Kind, decode_body, encode

_LEN = struct.Struct("<I")
_CONNECT_RETRY = 0.05
_CONNECT_TIMEOUT = 30.0


def _read_exact(sock: socket.socket, size: int) -> bytes:
    buf = b""
    while len(buf) < size:
        chunk = sock.recv(size - len(buf))
        if not chunk:
            raise TransportError("peer closed the channel mid-frame")
        buf += chunk
    return buf


def read_frame(sock: socket.socket) -> Frame:
    (length,) = _LEN.unpack(_read_exact(sock, _LEN.size))
    return decode_body(_read_exact(sock, length))


class SocketTransport:
    """Full-mesh reliable FIFO channels between p OS processes."""

    def __init__(self, rank: int, addresses: list[tuple[str, int]],
                 connect_timeout: float = _CONNECT_TIMEOUT):
        self.rank = rank
        self.p = len(addresses)
        self.addresses = addresses
        self._connect_timeout = connect_timeout
        self._peers: dict[int, socket.socket] = {}
        self._send_locks: dict[int, threading.Lock] = {}
        self._readers: list[threading.Thread] = []
        self._on_frame: Optional[Callable[[Frame], None]] = None
        self._control: queue.Queue = queue.Queue()
        self._closed = False
        if self.p > 1:
            self._connect_mesh()

    # -- mesh construction -----------------------------------------------------
    def _connect_mesh(self) -> None:
        host, port = self.addresses[self.rank]
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            listener.bind((host, port))
        except OSError as exc:
            raise ConnectFailure(f"rank {self.rank} cannot bind {host}:{port}: {exc}") from exc
        listener.listen(self.p)

        expected_inbound = self.p - 1 - self.rank  # higher ranks dial us
        accept_error: list[BaseException] = []

        def accept_loop():
            try:
                for _ in range(expected_inbound):
                    conn, _ = listener.accept()
                    conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                    hello = read_frame(conn)
                    assert hello.kind == Kind.HELLO
                    self._register(hello.origin, conn)
            except BaseException as exc:
                accept_error.append(exc)

        acceptor = threading.Thread(target=accept_loop, daemon=True)
        acceptor.start()

        for peer in range(self.rank):
            self._register(peer, self._dial(peer))
        acceptor.join(self._connect_timeout)
        if acceptor.is_alive() or accept_error:
            listener.close()
            raise ConnectFailure(
                f"rank {self.rank}: mesh incomplete: {accept_error or 'timeout'}")
        listener.close()

    def _dial(self, peer: int) -> socket.socket:
        host, port = self.addresses[peer]
        deadline = time.monotonic() + self._connect_timeout
        while True:
            try:
                conn = socket.create_connection((host, port), timeout=self._connect_timeout)
                conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                conn.sendall(encode(Frame(Kind.HELLO, origin=self.rank)))
                return conn
            except OSError as exc:
                if time.monotonic() > deadline:
                    raise ConnectFailure(f"rank {self.rank} cannot reach rank {peer} "
                                         f"at {host}:{port}: {exc}") from exc
                time.sleep(_CONNECT_RETRY)

    def _register(self, peer: int, conn: socket.socket) -> None:
        self._peers[peer] = conn
        self._send_locks[peer] = threading.Lock()

    # -- frame plumbing -----------------------------------------------------------
    def start(self, on_frame: Callable[[Frame], None]) -> None:
        """Begin delivering frames; reader threads feed the given callback."""
        self._on_frame = on_frame
        for peer, conn in self._peers.items():
            thread = threading.Thread(target=self._reader, args=(peer, conn),
                                      name=f"rx-{self.rank}-{peer}", daemon=True)
            thread.start()
            self._readers.append(thread)

    def _reader(self, peer: int, conn: socket.socket) -> None:
        try:
            while True:
                frame = read_frame(conn)
                if frame.kind in (Kind.MESH_READY, Kind.START):
                    self._control.put(frame)
                else:
                    self._on_frame(frame)
        except (TransportError, OSError):
            if not self._closed:
                self._control.put(Frame(Kind.FINAL))  # unblock any barrier waiter

    def barrier(self) -> None:
        """Everyone waits until rank 0 has seen the whole mesh report in."""
        if self.p == 1:
            return
        if self.rank == 0:
            ready = 0
            while ready < self.p - 1:
                frame = self._control.get(timeout=self._connect_timeout)
                if frame.kind != Kind.MESH_READY:
                    raise ConnectFailure("mesh barrier interrupted")
                ready += 1
            for peer in range(1, self.p):
                self.send(peer, Frame(Kind.START))
        else:
            self.send(0, Frame(Kind.MESH_READY, origin=self.rank))
            frame = self._control.get(timeout=self._connect_timeout)
            if frame.kind != Kind.START:
                raise ConnectFailure("start barrier interrupted")

    def send(self, dst: int, frame: Frame) -> None:
        if dst == self.rank:
            raise AssertionError("self-sends are handled locally")
        blob = encode(frame)
        conn = self._peers[dst]
        with self._send_locks[dst]:
            try:
                conn.sendall(blob)
            except OSError as exc:
                if self._closed:
                    return
                raise TransportError(f"channel {self.rank}->{dst} broke: {exc}") from exc

    def close(self) -> None:
        self._closed = True
        for conn in self._peers.values():
            try:
                conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            conn.close()


def free_ports(count: int) -> list[int]:
    """Pick currently-free TCP ports (racy: callers bind them soon after)."""
    sockets = []
    ports = []
    for _ in range(count):
        s = socket.socket()
        s.bind(("127.0.0.1", 0))
        sockets.append(s)
        ports.append(s.getsockname()[1])
    for s in sockets:
        s.close()
    return ports
