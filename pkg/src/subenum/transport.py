"""Daemon protocol: verifyE, fetchV, checkR, shareR.

Each worker runs a :class:`Daemon` that answers peers from owned data only,
and talks to peers through a :class:`Transport`. Two transports carry the
same frames: an in-process loopback (one daemon thread per worker) and TCP.
"""

from __future__ import annotations

import itertools
import logging
import socket
import socketserver
import threading
import time
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable

from .errors import NotOwner, OwnerUnknown, ProtocolError, SubenumError, TransportFailure, UnknownVertex
from .graph import PartitionView
from .grouping import GroupTable, RegionGroup
from .pattern import _norm
from .wire import Kind, Message, decode, encode, read_frame

log = logging.getLogger(__name__)

Edge = tuple[int, int]


class Daemon:
    """Answers the four request kinds for one machine."""

    def __init__(self, pv: PartitionView, table: GroupTable | None = None):
        self.pv = pv
        self.table = table if table is not None else GroupTable()
        self.served: Counter[Kind] = Counter()
        self._lock = threading.Lock()

    def handle(self, msg: Message) -> Message:
        if not msg.kind.is_request:
            raise ProtocolError(f"daemon got a response frame {msg.kind.name}")
        with self._lock:
            self.served[msg.kind] += 1
        pv = self.pv
        if msg.kind == Kind.VERIFY_E_REQ:
            out = []
            for a, b in msg.payload:
                if pv.is_owned(a):
                    out.append(b in pv.owned_set(a))
                elif pv.is_owned(b):
                    out.append(a in pv.owned_set(b))
                else:
                    raise NotOwner(f"machine {pv.machine_id} owns neither end of ({a}, {b})")
            payload = tuple(out)
        elif msg.kind == Kind.FETCH_V_REQ:
            items = []
            for v in msg.payload:
                if not pv.is_owned(v):
                    raise NotOwner(f"machine {pv.machine_id} does not own {v}")
                items.append((v, pv.local_adj[v]))
            payload = tuple(items)
        elif msg.kind == Kind.CHECK_R_REQ:
            payload = self.table.unprocessed()
        else:
            g = self.table.claim(remote=True)
            payload = g.members if g is not None else ()
        return Message(msg.kind.response, msg.correlation_id, pv.machine_id, payload)

    def handle_frame(self, frame: bytes) -> bytes:
        return encode(self.handle(decode(frame)))


@dataclass
class Counters:
    sent: Counter = field(default_factory=Counter)
    bytes_sent: int = 0
    bytes_received: int = 0
    fetched: Counter = field(default_factory=Counter)
    verified: Counter = field(default_factory=Counter)

    def as_dict(self) -> dict:
        return {
            "messages": {k.name: n for k, n in sorted(self.sent.items())},
            "bytes_sent": self.bytes_sent,
            "bytes_received": self.bytes_received,
            "vertices_fetched": sum(self.fetched.values()),
            "edges_verified": sum(self.verified.values()),
        }


class Transport:
    """Client side of the protocol for one machine."""

    def __init__(self, machine_id: int, peers: Iterable[int]):
        self.machine_id = machine_id
        self.peers = sorted(p for p in peers if p != machine_id)
        self.counters = Counters()
        self._corr = itertools.count(1)

    def _roundtrip(self, target: int, frame: bytes) -> bytes:
        raise NotImplementedError

    def call(self, target: int, kind: Kind, payload=None) -> Message:
        msg = Message(kind, next(self._corr), self.machine_id, payload)
        frame = encode(msg)
        self.counters.sent[kind] += 1
        self.counters.bytes_sent += len(frame)
        raw = self._roundtrip(target, frame)
        self.counters.bytes_received += len(raw)
        reply = decode(raw)
        if reply.correlation_id != msg.correlation_id or reply.kind != kind.response:
            raise ProtocolError(
                f"expected {kind.response.name}#{msg.correlation_id}, got {reply.kind.name}#{reply.correlation_id}"
            )
        return reply

    def close(self) -> None:
        pass


class LoopbackNetwork:
    """In-process cluster: every daemon gets its own single-thread executor."""

    def __init__(self):
        self._daemons: dict[int, tuple[Daemon, ThreadPoolExecutor]] = {}

    def serve(self, daemon: Daemon) -> None:
        mid = daemon.pv.machine_id
        pool = ThreadPoolExecutor(max_workers=1, thread_name_prefix=f"daemon-{mid}")
        self._daemons[mid] = (daemon, pool)

    def submit(self, target: int, frame: bytes):
        try:
            daemon, pool = self._daemons[target]
        except KeyError:
            raise TransportFailure(f"no daemon for machine {target}") from None
        return pool.submit(daemon.handle_frame, frame)

    def transport(self, machine_id: int) -> "LoopbackTransport":
        return LoopbackTransport(self, machine_id)

    @property
    def machines(self) -> list[int]:
        return sorted(self._daemons)

    def shutdown(self) -> None:
        for _, pool in self._daemons.values():
            pool.shutdown(wait=True)


class LoopbackTransport(Transport):
    def __init__(self, network: LoopbackNetwork, machine_id: int):
        super().__init__(machine_id, network.machines)
        self.network = network

    def _roundtrip(self, target: int, frame: bytes) -> bytes:
        return self.network.submit(target, frame).result()


def read_hosts(text: str) -> dict[int, tuple[str, int]]:
    """Parse a hosts file: ``machine_id host:port`` per line."""
    hosts = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            mid, addr = line.split()
            host, port = addr.rsplit(":", 1)
            hosts[int(mid)] = (host, int(port))
        except ValueError:
            raise SubenumError(f"hosts line {lineno}: expected 'id host:port', got {line!r}") from None
    return hosts


def _recv_exactly(sock: socket.socket):
    def recv(n: int) -> bytes | None:
        chunks = []
        while n:
            chunk = sock.recv(n)
            if not chunk:
                if chunks:
                    raise ProtocolError("connection closed mid-frame")
                return None
            chunks.append(chunk)
            n -= len(chunk)
        return b"".join(chunks)

    return recv


class _FrameHandler(socketserver.BaseRequestHandler):
    def handle(self):
        daemon: Daemon = self.server.daemon
        recv = _recv_exactly(self.request)
        while True:
            try:
                frame = read_frame(recv)
                if frame is None:
                    return
                self.request.sendall(daemon.handle_frame(frame))
            except (SubenumError, ValueError) as exc:
                log.warning("machine %d: dropping connection: %s", daemon.pv.machine_id, exc)
                return
            except OSError:
                return


class TcpDaemonServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, daemon: Daemon, host: str = "127.0.0.1", port: int = 0):
        self.daemon = daemon
        super().__init__((host, port), _FrameHandler)
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self.server_address[:2]

    def start(self) -> "TcpDaemonServer":
        self._thread = threading.Thread(target=self.serve_forever, daemon=True,
                                        name=f"tcp-daemon-{self.daemon.pv.machine_id}")
        self._thread.start()
        return self

    def stop(self) -> None:
        self.shutdown()
        self.server_close()


class TcpTransport(Transport):
    """One persistent connection per peer, opened lazily with retries."""

    def __init__(self, machine_id: int, hosts: dict[int, tuple[str, int]], connect_timeout: float = 10.0):
        super().__init__(machine_id, hosts)
        self.hosts = hosts
        self.connect_timeout = connect_timeout
        self._socks: dict[int, socket.socket] = {}

    def _connect(self, target: int) -> socket.socket:
        sock = self._socks.get(target)
        if sock is not None:
            return sock
        try:
            addr = self.hosts[target]
        except KeyError:
            raise TransportFailure(f"no host entry for machine {target}") from None
        deadline = time.monotonic() + self.connect_timeout
        while True:
            try:
                sock = socket.create_connection(addr, timeout=30)
                sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                break
            except OSError as exc:
                if time.monotonic() > deadline:
                    raise TransportFailure(f"cannot reach machine {target} at {addr}: {exc}") from exc
                time.sleep(0.05)
        self._socks[target] = sock
        return sock

    def _roundtrip(self, target: int, frame: bytes) -> bytes:
        sock = self._connect(target)
        try:
            sock.sendall(frame)
            reply = read_frame(_recv_exactly(sock))
        except OSError as exc:
            self._drop(target)
            raise TransportFailure(f"machine {target}: {exc}") from exc
        except ProtocolError as exc:
            self._drop(target)
            raise TransportFailure(f"machine {target}: {exc}") from exc
        if reply is None:
            self._drop(target)
            raise TransportFailure(f"machine {target} closed the connection")
        return reply

    def _drop(self, target: int) -> None:
        sock = self._socks.pop(target, None)
        if sock is not None:
            sock.close()

    def close(self) -> None:
        for t in list(self._socks):
            self._drop(t)


# -- request helpers used by the enumeration thread ------------------------


def verify_edges(batch: Iterable[Edge], pv: PartitionView, transport: Transport) -> dict[Edge, bool]:
    """Verify edges remotely, one request per owning machine.

    Each edge goes to the owner of its smaller endpoint. Edges with an owned
    endpoint are answered locally.
    """
    edges = sorted({_norm(a, b) for a, b in batch})
    out: dict[Edge, bool] = {}
    by_target: dict[int, list[Edge]] = defaultdict(list)
    for e in edges:
        a, b = e
        if pv.is_owned(a):
            out[e] = b in pv.owned_set(a)
        elif pv.is_owned(b):
            out[e] = a in pv.owned_set(b)
        else:
            try:
                by_target[pv.owner(a)].append(e)
            except UnknownVertex:
                raise OwnerUnknown(a) from None
    for target in sorted(by_target):
        req = by_target[target]
        reply = transport.call(target, Kind.VERIFY_E_REQ, tuple(req))
        if len(reply.payload) != len(req):
            raise ProtocolError("verifyE response length mismatch")
        for e, ok in zip(req, reply.payload):
            out[e] = ok
            transport.counters.verified[e] += 1
    return out


def fetch_vertices(needed: Iterable[int], pv: PartitionView, transport: Transport) -> int:
    """Fetch adjacency lists of uncached foreign vertices into ``pv.cache``.

    Returns the number of vertices fetched.
    """
    by_owner: dict[int, list[int]] = defaultdict(list)
    for v in sorted(set(needed)):
        if pv.is_owned(v) or v in pv.cache:
            continue
        by_owner[pv.owner(v)].append(v)
    n = 0
    for owner in sorted(by_owner):
        req = by_owner[owner]
        reply = transport.call(owner, Kind.FETCH_V_REQ, tuple(req))
        got = {v for v, _ in reply.payload}
        if got != set(req):
            raise ProtocolError(f"fetchV from {owner} returned {sorted(got)} for {req}")
        for v, adj in reply.payload:
            pv.cache.put(v, adj)
            transport.counters.fetched[v] += 1
        n += len(req)
    return n


def steal_work(transport: Transport) -> RegionGroup | None:
    """Ask every peer for its backlog and take a group from the busiest.

    A peer that cannot be reached counts as having nothing to share.
    """
    while True:
        counts = {}
        for peer in transport.peers:
            try:
                counts[peer] = transport.call(peer, Kind.CHECK_R_REQ).payload
            except TransportFailure as exc:
                log.info("machine %d: checkR to %d failed: %s", transport.machine_id, peer, exc)
                counts[peer] = 0
        if not counts or max(counts.values()) == 0:
            return None
        victim = min(counts, key=lambda m: (-counts[m], m))
        try:
            members = transport.call(victim, Kind.SHARE_R_REQ).payload
        except TransportFailure:
            continue
        if members:
            return RegionGroup(tuple(members), processed=True)
        # lost a race for the last group; look again
