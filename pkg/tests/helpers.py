"""Shared fixtures: small hand-built graphs and graph strategies."""

from pathlib import Path

from hypothesis import strategies as st

from subenum.graph import Adjacency, build_views
from subenum.pattern import named_pattern
from subenum.planner import select_plan

# acceptance criterion number -> PASS/FAIL line, printed by conftest
ACCEPTANCE: dict[int, str] = {}

# Running example, two machines. Machine 0 owns the vertices listed first.
RUNNING_EDGES = [
    (0, 1), (0, 2), (0, 7), (0, 9), (0, 11),
    (1, 2), (1, 3), (1, 4), (1, 8),
    (2, 5), (2, 6), (2, 10),
    (3, 4), (4, 5), (5, 6), (9, 11),
    (8, 10), (10, 12), (10, 13), (10, 14), (11, 15), (11, 16),
]
RUNNING_OWNER0 = {0, 2, 3, 4, 5, 7, 11, 15, 16}


def graph_from_edges(edges, vertices=()) -> Adjacency:
    nbrs = {v: set() for v in vertices}
    for a, b in edges:
        nbrs.setdefault(a, set()).add(b)
        nbrs.setdefault(b, set()).add(a)
    return {v: tuple(sorted(s)) for v, s in sorted(nbrs.items())}


def grid(w, h, diagonals=False):
    """w x h lattice; vertex (x, y) gets id x * h + y. Returns (graph, ids)."""
    edges = [((x, y), (x + 1, y)) for x in range(w - 1) for y in range(h)]
    edges += [((x, y), (x, y + 1)) for x in range(w) for y in range(h - 1)]
    if diagonals:
        edges += [((x, y), (x + 1, y + 1)) for x in range(w - 1) for y in range(h - 1)]
    ids = {(x, y): x * h + y for x in range(w) for y in range(h)}
    return graph_from_edges([(ids[a], ids[b]) for a, b in edges]), ids


def running_graph() -> Adjacency:
    return graph_from_edges(RUNNING_EDGES)


def running_views(cache_budget=0):
    g = running_graph()
    own = {v: 0 if v in RUNNING_OWNER0 else 1 for v in g}
    return build_views(g, own, 2, cache_budget)


def running_plan():
    # the plan rooted at u0, whose first unit takes u1, u2, u7, u8, u9
    return select_plan(named_pattern("pstar"), 1.0, root=0)


@st.composite
def graphs(draw, min_n=1, max_n=14, max_p=0.6):
    n = draw(st.integers(min_n, max_n))
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    keep = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    edges = [e for e, k in zip(pairs, keep) if k]
    return graph_from_edges(edges, range(n))


@st.composite
def partitioned(draw, **kw):
    g = draw(graphs(**kw))
    m = draw(st.integers(1, 4))
    own = {v: draw(st.integers(0, m - 1)) for v in g}
    return g, own, m


GOLDEN = Path(__file__).parent / "golden" / "frames.hex"


def golden_frames():
    """(name, kind, bytes) per line of the golden file, requests and responses alternating."""
    out = []
    for line in GOLDEN.read_text().splitlines():
        if line.startswith("#") or not line.strip():
            continue
        name, kind, hexed = line.split()
        out.append((name, int(kind), bytes.fromhex(hexed)))
    return out


def golden_daemon():
    """The machine-1 daemon whose replies the golden responses record."""
    from subenum.grouping import GroupTable, RegionGroup
    from subenum.transport import Daemon

    own = {0: 0, 1: 1, 2: 0, 3: 1}
    (_, pv) = build_views({0: (1,), 1: (0, 2, 3), 2: (1,), 3: (1,)}, own, 2)
    table = GroupTable()
    table.set_groups([RegionGroup((1,)), RegionGroup((3,))])
    return Daemon(pv, table)
