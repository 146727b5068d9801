"""Partitioned adjacency-list store.

A ``PartitionView`` is what one machine sees of the data graph: the full
adjacency lists of the vertices it owns, the global ownership map, the
border-distance table and a budgeted cache of foreign adjacency lists.
"""

from __future__ import annotations

import enum
import math
from collections import OrderedDict, deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import MissingAdjacency, UnknownVertex

Adjacency = dict[int, tuple[int, ...]]

INF = math.inf

# one vertex id plus its neighbour ids, 8 bytes each
BYTES_PER_ID = 8


class EdgePresence(enum.Enum):
    PRESENT = "present"
    ABSENT = "absent"
    UNDETERMINED = "undetermined"


def entry_bytes(adj: tuple[int, ...]) -> int:
    return BYTES_PER_ID * (len(adj) + 1)


class ForeignCache:
    """LRU cache of fetched foreign adjacency lists.

    ``budget`` is in bytes; 0 means unbounded. Eviction only happens when
    :meth:`evict` is called, so a round can pin everything it fetched.
    """

    def __init__(self, budget: int = 0):
        self.budget = budget
        self._entries: OrderedDict[int, tuple[int, ...]] = OrderedDict()
        self._sets: dict[int, frozenset[int]] = {}
        self.bytes = 0
        self.evictions = 0

    def __contains__(self, v: int) -> bool:
        return v in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def keys(self):
        return self._entries.keys()

    def get(self, v: int) -> tuple[int, ...] | None:
        return self._entries.get(v)

    def get_set(self, v: int) -> frozenset[int] | None:
        return self._sets.get(v)

    def put(self, v: int, adj: Iterable[int]) -> None:
        adj = tuple(sorted(set(adj)))
        if v in self._entries:
            self.bytes -= entry_bytes(self._entries.pop(v))
        self._entries[v] = adj
        self._sets[v] = frozenset(adj)
        self.bytes += entry_bytes(adj)

    def evict(self) -> list[int]:
        """Drop least-recently-fetched entries until under budget."""
        dropped = []
        if self.budget <= 0:
            return dropped
        while self.bytes > self.budget and self._entries:
            v, adj = self._entries.popitem(last=False)
            del self._sets[v]
            self.bytes -= entry_bytes(adj)
            dropped.append(v)
        self.evictions += len(dropped)
        return dropped


@dataclass
class PartitionView:
    machine_id: int
    local_adj: Adjacency
    ownership: Mapping[int, int]
    cache: ForeignCache = field(default_factory=ForeignCache)
    border_distance: dict[int, float] = field(init=False)

    def __post_init__(self):
        self._sets = {v: frozenset(nbrs) for v, nbrs in self.local_adj.items()}
        self.border_distance = compute_border_distances(self)

    def owner(self, v: int) -> int:
        try:
            return self.ownership[v]
        except (KeyError, IndexError):
            raise UnknownVertex(v) from None

    def is_owned(self, v: int) -> bool:
        return v in self._sets

    def is_local(self, v: int) -> bool:
        """Owned, or foreign with a cached adjacency list."""
        return v in self._sets or v in self.cache

    def adjacency(self, v: int) -> tuple[int, ...]:
        adj = self.local_adj.get(v)
        if adj is None:
            adj = self.cache.get(v)
            if adj is None:
                raise MissingAdjacency(v)
        return adj

    def neighbor_set(self, v: int) -> frozenset[int]:
        s = self._sets.get(v)
        if s is None:
            s = self.cache.get_set(v)
            if s is None:
                raise MissingAdjacency(v)
        return s

    def local_set(self, v: int) -> frozenset[int] | None:
        """Neighbour set if ``v`` is owned or cached, else None."""
        s = self._sets.get(v)
        if s is None:
            s = self.cache.get_set(v)
        return s

    def owned_set(self, v: int) -> frozenset[int]:
        return self._sets[v]

    @property
    def owned(self):
        return self.local_adj.keys()


def degree(pv: PartitionView, v: int) -> int:
    try:
        return len(pv.adjacency(v))
    except MissingAdjacency:
        raise UnknownVertex(v) from None


def border_vertices(pv: PartitionView) -> set[int]:
    t = pv.machine_id
    own = pv.ownership
    return {v for v, nbrs in pv.local_adj.items() if any(own[w] != t for w in nbrs)}


def compute_border_distances(pv: PartitionView) -> dict[int, float]:
    """Multi-source BFS from the border set over owned-owned edges."""
    border = border_vertices(pv)
    dist: dict[int, float] = {v: INF for v in pv.local_adj}
    queue = deque()
    for b in border:
        dist[b] = 0
        queue.append(b)
    while queue:
        v = queue.popleft()
        d = dist[v] + 1
        for w in pv.local_adj[v]:
            if w in dist and dist[w] > d:
                dist[w] = d
                queue.append(w)
    return dist


def edge_presence(pv: PartitionView, a: int, b: int) -> EdgePresence:
    s = pv.local_set(a)
    if s is None or (not pv.is_owned(a) and pv.is_owned(b)):
        # prefer owned data over cached data when both exist
        s2 = pv.local_set(b)
        if s2 is not None:
            return EdgePresence.PRESENT if a in s2 else EdgePresence.ABSENT
    if s is not None:
        return EdgePresence.PRESENT if b in s else EdgePresence.ABSENT
    return EdgePresence.UNDETERMINED


def build_views(
    graph: Adjacency,
    ownership: Mapping[int, int],
    machines: int | None = None,
    cache_budget: int = 0,
) -> list[PartitionView]:
    """Split a whole graph into one view per machine."""
    m = machines if machines is not None else max(ownership.values(), default=-1) + 1
    parts: list[Adjacency] = [{} for _ in range(m)]
    for v, nbrs in graph.items():
        parts[ownership[v]][v] = nbrs
    return [PartitionView(t, parts[t], ownership, ForeignCache(cache_budget)) for t in range(m)]
