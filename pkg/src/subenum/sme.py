"""Single-machine enumeration and the brute-force reference matcher."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .graph import PartitionView
from .pattern import OrderConstraints, QueryPattern, span, symmetry_constraints
from .planner import ExecutionPlan
from .trie import BYTES_PER_NODE

Embedding = tuple[int, ...]


@dataclass
class LocalStats:
    nodes: dict[int, int] = field(default_factory=dict)
    bytes_per_node: int = BYTES_PER_NODE

    @property
    def avg_bytes_per_candidate(self) -> float | None:
        if not self.nodes:
            return None
        return self.bytes_per_node * sum(self.nodes.values()) / len(self.nodes)


def split_candidates(pv: PartitionView, p: QueryPattern, u_start: int) -> tuple[list[int], list[int]]:
    """Candidates of ``u_start`` split into (provably local, distributed)."""
    need = p.degree(u_start)
    reach = span(p, u_start)
    c1, c2 = [], []
    for v in sorted(pv.owned):
        if len(pv.local_adj[v]) < need:
            continue
        (c1 if reach <= pv.border_distance[v] else c2).append(v)
    return c1, c2


def _match_steps(p: QueryPattern, order: tuple[int, ...]):
    """For each position after the first: (query vertex, earlier neighbours)."""
    pos = {u: i for i, u in enumerate(order)}
    steps = []
    for i, u in enumerate(order[1:], 1):
        back = sorted((w for w in p.adj[u] if pos[w] < i), key=pos.__getitem__)
        steps.append((u, back, p.degree(u)))
    return steps


def local_enumerate(
    pv: PartitionView,
    p: QueryPattern,
    plan: ExecutionPlan,
    c1: list[int],
    constraints: OrderConstraints | None = None,
) -> tuple[list[Embedding], LocalStats]:
    """Backtracking over owned vertices only, in the plan's matching order.

    Embeddings are returned as tuples in matching order. ``LocalStats.nodes``
    counts, per start vertex, the trie nodes its local results would take:
    the root plus every admitted candidate at every step.
    """
    if constraints is None:
        constraints = symmetry_constraints(p)
    order = plan.matching_order
    steps = _match_steps(p, order)
    depth = len(steps)
    out: list[Embedding] = []
    stats = LocalStats()
    mapping: dict[int, int] = {}
    used: set[int] = set()
    owned = pv.owned
    counter = [0]

    def extend(i: int) -> None:
        if i == depth:
            out.append(tuple(mapping[u] for u in order))
            return
        u, back, need = steps[i]
        cand = pv.owned_set(mapping[back[0]])
        for w in back[1:]:
            cand = cand & pv.owned_set(mapping[w])
        for v in sorted(cand):
            if v in used or v not in owned or len(pv.local_adj[v]) < need:
                continue
            if not constraints.admits(u, v, mapping):
                continue
            counter[0] += 1
            mapping[u] = v
            used.add(v)
            extend(i + 1)
            del mapping[u]
            used.discard(v)

    start = order[0]
    for v in c1:
        counter[0] = 1
        mapping[start] = v
        used.add(v)
        extend(0)
        del mapping[start]
        used.discard(v)
        stats.nodes[v] = counter[0]
    return out, stats


def oracle_enumerate(graph: Mapping[int, tuple[int, ...]], p: QueryPattern) -> set[Embedding]:
    """All embeddings of ``p`` in the whole graph, one per automorphism class.

    Embeddings are tuples ordered like ``p.vertices``.
    """
    constraints = symmetry_constraints(p)
    if len(p.vertices) > len(graph):
        return set()
    nbrs = {v: set(a) for v, a in graph.items()}
    # greedy order: highest degree first, then most already-ordered neighbours
    order = [max(p.vertices, key=lambda u: (p.degree(u), -u))]
    while len(order) < len(p.vertices):
        rest = [u for u in p.vertices if u not in order]
        order.append(max(rest, key=lambda u: (len(p.adj[u] & set(order)), p.degree(u), -u)))
    back = {u: [w for w in p.adj[u] if w in order[:i]] for i, u in enumerate(order)}
    found: set[Embedding] = set()
    f: dict[int, int] = {}

    def go(i: int) -> None:
        if i == len(order):
            found.add(tuple(f[u] for u in p.vertices))
            return
        u = order[i]
        if back[u]:
            cand = set.intersection(*(nbrs[f[w]] for w in back[u]))
        else:
            cand = graph.keys()
        for v in cand:
            if v in f.values() or len(nbrs[v]) < p.degree(u):
                continue
            f[u] = v
            if constraints.admits(u, v, f):
                go(i + 1)
            del f[u]

    go(0)
    return found


def to_canonical(p: QueryPattern, order: tuple[int, ...], emb: Embedding) -> Embedding:
    """Reorder an embedding given in ``order`` to ``p.vertices`` order."""
    m = dict(zip(order, emb))
    return tuple(m[u] for u in p.vertices)
