import socket
import threading

import pytest

from helpers import golden_daemon, golden_frames, running_views
from subenum.errors import NotOwner, ProtocolError, SubenumError, TransportFailure
from subenum.gen import random_graph
from subenum.graph import build_views
from subenum.grouping import GroupTable, RegionGroup
from subenum.transport import (
    Daemon,
    LoopbackNetwork,
    TcpDaemonServer,
    TcpTransport,
    Transport,
    fetch_vertices,
    read_hosts,
    steal_work,
    verify_edges,
)
from subenum.wire import Kind, Message, decode, encode, read_frame


@pytest.fixture
def cluster():
    views = running_views()
    net = LoopbackNetwork()
    for pv in views:
        net.serve(Daemon(pv))
    yield views, net
    net.shutdown()


def tables(*sizes):
    out = []
    for n in sizes:
        t = GroupTable()
        t.set_groups([RegionGroup((100 + i,)) for i in range(n)])
        out.append(t)
    return out


def test_daemon_answers():
    daemon = golden_daemon()
    assert daemon.handle(Message(Kind.VERIFY_E_REQ, 1, 0, ((1, 0),))).payload == (True,)
    assert daemon.handle(Message(Kind.CHECK_R_REQ, 2, 0)).payload == 2
    assert daemon.handle(Message(Kind.FETCH_V_REQ, 3, 0, (1, 3))).payload == ((1, (0, 2, 3)), (3, (1,)))
    with pytest.raises(NotOwner):
        daemon.handle(Message(Kind.FETCH_V_REQ, 4, 0, (0,)))
    with pytest.raises(NotOwner):
        daemon.handle(Message(Kind.VERIFY_E_REQ, 5, 0, ((0, 2),)))
    with pytest.raises(ProtocolError):
        daemon.handle(Message(Kind.CHECK_R_RESP, 6, 0, 1))


def test_check_counts_unprocessed_groups():
    (table,) = tables(3)
    g = {0: (1,), 1: (0,)}
    (pv,) = build_views(g, {0: 0, 1: 0})
    assert Daemon(pv, table).handle(Message(Kind.CHECK_R_REQ, 1, 5)).payload == 3


def test_verify_empty_batch_sends_nothing(cluster):
    views, net = cluster
    tr = net.transport(0)
    assert verify_edges([], views[0], tr) == {}
    assert sum(tr.counters.sent.values()) == 0


def test_verify_remote_edge_is_false(cluster):
    views, net = cluster
    tr = net.transport(0)
    assert verify_edges([(9, 1)], views[0], tr) == {(1, 9): False}
    assert tr.counters.sent == {Kind.VERIFY_E_REQ: 1}


def test_verify_dedups_and_answers_owned_locally(cluster):
    views, net = cluster
    tr = net.transport(0)
    got = verify_edges([(1, 8)] * 5 + [(8, 1), (0, 1), (2, 12)], views[0], tr)
    assert got == {(1, 8): True, (0, 1): True, (2, 12): False}
    assert tr.counters.sent[Kind.VERIFY_E_REQ] == 1
    assert tr.counters.verified == {(1, 8): 1}


def test_fetch_groups_by_owner(cluster):
    views, net = cluster
    tr = net.transport(0)
    assert fetch_vertices([1, 9], views[0], tr) == 2
    assert tr.counters.sent == {Kind.FETCH_V_REQ: 1}
    assert views[0].cache.get(9) == (0, 11)
    # already cached: nothing more on the wire
    assert fetch_vertices([9, 1, 0], views[0], tr) == 0
    assert tr.counters.sent == {Kind.FETCH_V_REQ: 1}


def test_fetch_three_vertices_on_two_owners():
    g = random_graph(12, 4, 0)
    own = {v: v % 3 for v in g}
    views = build_views(g, own, 3)
    net = LoopbackNetwork()
    for pv in views:
        net.serve(Daemon(pv))
    try:
        tr = net.transport(0)
        assert fetch_vertices([1, 4, 2], views[0], tr) == 3
        assert tr.counters.sent[Kind.FETCH_V_REQ] == 2
    finally:
        net.shutdown()


def _three_machines(sizes):
    views = build_views({0: (1,), 1: (0, 2), 2: (1,)}, {0: 0, 1: 1, 2: 2}, 3)
    net = LoopbackNetwork()
    ts = tables(*sizes)
    for pv, t in zip(views, ts):
        net.serve(Daemon(pv, t))
    return net, ts


def test_steal_picks_busiest_peer():
    net, ts = _three_machines((0, 2, 5))
    try:
        grp = steal_work(net.transport(0))
    finally:
        net.shutdown()
    assert grp is not None and grp.processed
    assert grp.members == (104,)  # thieves take from the back
    assert (ts[1].shared, ts[2].shared) == (0, 1)


def test_steal_tie_goes_to_smaller_id():
    net, ts = _three_machines((0, 3, 3))
    try:
        steal_work(net.transport(0))
    finally:
        net.shutdown()
    assert (ts[1].shared, ts[2].shared) == (1, 0)


def test_steal_returns_none_when_idle():
    net, _ = _three_machines((4, 0, 0))
    try:
        tr = net.transport(0)
        assert steal_work(tr) is None
        assert tr.counters.sent == {Kind.CHECK_R_REQ: 2}
    finally:
        net.shutdown()


def test_concurrent_share_for_last_group():
    daemon = golden_daemon()
    daemon.table.set_groups([RegionGroup((3,))])
    replies = []
    barrier = threading.Barrier(2)

    def ask(i):
        barrier.wait()
        replies.append(daemon.handle(Message(Kind.SHARE_R_REQ, i, i)).payload)

    threads = [threading.Thread(target=ask, args=(i,)) for i in range(2)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sorted(replies) == [(), (3,)]


class _Echo(Transport):
    def _roundtrip(self, target, frame):
        msg = decode(frame)
        return encode(Message(msg.kind.response, msg.correlation_id + 1, target, 0))


def test_correlation_mismatch_is_a_protocol_error():
    with pytest.raises(ProtocolError):
        _Echo(0, [1]).call(1, Kind.CHECK_R_REQ)


def test_read_hosts():
    assert read_hosts("# cluster\n0 127.0.0.1:9000\n1 host-b:9001\n") == {
        0: ("127.0.0.1", 9000), 1: ("host-b", 9001)}
    with pytest.raises(SubenumError):
        read_hosts("0 nowhere")


def _recv_exactly(sock):
    def recv(n):
        buf = b""
        while len(buf) < n:
            chunk = sock.recv(n - len(buf))
            if not chunk:
                return buf or None
            buf += chunk
        return buf

    return recv


def test_tcp_golden_frames_byte_exact():
    server = TcpDaemonServer(golden_daemon()).start()
    frames = golden_frames()
    try:
        with socket.create_connection(server.address) as sock:
            recv = _recv_exactly(sock)
            for (_, _, req), (_, _, resp) in zip(frames[::2], frames[1::2]):
                sock.sendall(req)
                assert read_frame(recv) == resp
    finally:
        server.stop()


def test_tcp_transport_call_and_failure():
    server = TcpDaemonServer(golden_daemon()).start()
    try:
        tr = TcpTransport(0, {1: server.address})
        assert tr.call(1, Kind.CHECK_R_REQ).payload == 2
        assert tr.call(1, Kind.SHARE_R_REQ).payload == (3,)
        assert tr.counters.sent == {Kind.CHECK_R_REQ: 1, Kind.SHARE_R_REQ: 1}
        tr.close()
    finally:
        server.stop()
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        dead = s.getsockname()
    tr = TcpTransport(0, {1: dead}, connect_timeout=0.2)
    with pytest.raises(TransportFailure):
        tr.call(1, Kind.CHECK_R_REQ)
    # an unreachable peer counts as having no work
    assert steal_work(tr) is None


def test_tcp_daemon_drops_malformed_connection():
    server = TcpDaemonServer(golden_daemon()).start()
    try:
        with socket.create_connection(server.address) as sock:
            sock.sendall(b"\x05\x00\x00\x00\x63\x00\x00\x00\x00")
            sock.settimeout(5)
            assert sock.recv(16) == b""
        tr = TcpTransport(0, {1: server.address})
        assert tr.call(1, Kind.CHECK_R_REQ).payload == 2
        tr.close()
    finally:
        server.stop()
