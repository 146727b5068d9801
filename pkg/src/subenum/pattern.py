"""Query patterns, vertex span and automorphism-based symmetry breaking."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

from .errors import Disconnected, DuplicateEdge, ParseError, PatternTooLarge, SelfLoop

MAX_BRUTE_FORCE = 16


def _norm(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class QueryPattern:
    vertices: tuple[int, ...]
    edges: frozenset[tuple[int, int]]

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[int, int]]) -> "QueryPattern":
        seen: set[tuple[int, int]] = set()
        for a, b in edges:
            if a == b:
                raise SelfLoop(f"self-loop on {a}")
            e = _norm(a, b)
            if e in seen:
                raise DuplicateEdge(f"duplicate edge {e}")
            seen.add(e)
        if not seen:
            raise ParseError("pattern has no edges")
        verts = tuple(sorted({x for e in seen for x in e}))
        p = cls(verts, frozenset(seen))
        if not p.is_connected():
            raise Disconnected("pattern is not connected")
        return p

    @cached_property
    def adj(self) -> dict[int, frozenset[int]]:
        out: dict[int, set[int]] = {u: set() for u in self.vertices}
        for a, b in self.edges:
            out[a].add(b)
            out[b].add(a)
        return {u: frozenset(n) for u, n in out.items()}

    def degree(self, u: int) -> int:
        return len(self.adj[u])

    def has_edge(self, a: int, b: int) -> bool:
        return b in self.adj[a]

    def is_connected(self) -> bool:
        if not self.vertices:
            return True
        return len(bfs_distances(self, self.vertices[0])) == len(self.vertices)

    def __len__(self) -> int:
        return len(self.vertices)

    def to_text(self) -> str:
        return "".join(f"{a} {b}\n" for a, b in sorted(self.edges))


def parse_pattern(text: str) -> QueryPattern:
    """Parse the edge-list pattern format: one ``u v`` pair per line."""
    edges = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"expected 'u v', got {line!r}", lineno)
        try:
            edges.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise ParseError(f"non-integer vertex in {line!r}", lineno) from None
    return QueryPattern.from_edges(edges)


def bfs_distances(p: QueryPattern, source: int) -> dict[int, int]:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for w in p.adj[u]:
            if w not in dist:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def span(p: QueryPattern, u: int) -> int:
    """Eccentricity of ``u`` in ``p``."""
    return max(bfs_distances(p, u).values())


def automorphisms(p: QueryPattern) -> list[dict[int, int]]:
    """All automorphisms of ``p`` by backtracking with degree pruning."""
    if len(p) > MAX_BRUTE_FORCE:
        raise PatternTooLarge(f"{len(p)} vertices > {MAX_BRUTE_FORCE}")
    # map vertices in BFS order so every step after the first is adjacency-constrained
    order = list(bfs_distances(p, p.vertices[0]))
    found: list[dict[int, int]] = []
    mapping: dict[int, int] = {}
    used: set[int] = set()

    def extend(i: int) -> None:
        if i == len(order):
            found.append(dict(mapping))
            return
        u = order[i]
        for w in p.vertices:
            if w in used or p.degree(w) != p.degree(u):
                continue
            if all(p.has_edge(w, mapping[x]) == p.has_edge(u, x) for x in order[:i]):
                mapping[u] = w
                used.add(w)
                extend(i + 1)
                del mapping[u]
                used.discard(w)

    extend(0)
    return found


@dataclass(frozen=True)
class OrderConstraints:
    """Pairs ``(a, b)``: the data vertex of ``a`` must be smaller than that of ``b``."""

    pairs: tuple[tuple[int, int], ...] = ()
    by_vertex: dict[int, tuple[tuple[int, bool], ...]] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        idx: dict[int, list[tuple[int, bool]]] = {}
        for a, b in self.pairs:
            # (other, self_must_be_smaller)
            idx.setdefault(a, []).append((b, True))
            idx.setdefault(b, []).append((a, False))
        object.__setattr__(self, "by_vertex", {u: tuple(v) for u, v in idx.items()})

    def admits(self, u: int, v: int, mapping: dict[int, int]) -> bool:
        """Can ``u`` take data vertex ``v`` given the already-mapped vertices?"""
        for other, smaller in self.by_vertex.get(u, ()):
            w = mapping.get(other)
            if w is None:
                continue
            if smaller and not v < w:
                return False
            if not smaller and not w < v:
                return False
        return True

    def bounds(self, u: int, mapping: dict[int, int]) -> tuple[float, float]:
        """Open interval that the data vertex of ``u`` must fall in."""
        lo, hi = -1, float("inf")
        for other, smaller in self.by_vertex.get(u, ()):
            w = mapping.get(other)
            if w is None:
                continue
            if smaller:
                hi = min(hi, w)
            else:
                lo = max(lo, w)
        return lo, hi

    def satisfied(self, mapping: dict[int, int]) -> bool:
        return all(mapping[a] < mapping[b] for a, b in self.pairs)


def symmetry_constraints(p: QueryPattern) -> OrderConstraints:
    """Grochow-Kellis conditions: fix one vertex of a non-trivial orbit at a time.

    For the first vertex whose orbit under the remaining group is larger
    than one, require it to be the smallest of its orbit, then recurse into
    its stabilizer.
    """
    group = automorphisms(p)
    pairs: list[tuple[int, int]] = []
    while len(group) > 1:
        for u in p.vertices:
            orbit = sorted({g[u] for g in group})
            if len(orbit) > 1:
                break
        pairs.extend((u, w) for w in orbit if w != u)
        group = [g for g in group if g[u] == u]
    return OrderConstraints(tuple(pairs))


def _path(k: int) -> list[tuple[int, int]]:
    return [(i, i + 1) for i in range(k - 1)]


# spanning tree edges followed by the five non-tree edges
PSTAR_EDGES = [
    (0, 1), (0, 2), (0, 7), (0, 8), (0, 9), (1, 3), (1, 4), (2, 5), (2, 6),
    (1, 2), (3, 4), (4, 5), (5, 6), (8, 9),
]

STANDARD_PATTERNS: dict[str, list[tuple[int, int]]] = {
    "edge": [(0, 1)],
    "wedge": _path(3),
    "triangle": [(0, 1), (1, 2), (0, 2)],
    "square": [(0, 1), (1, 2), (2, 3), (3, 0)],
    "clique4": [(a, b) for a in range(4) for b in range(a + 1, 4)],
    "path5": _path(5),
    "pstar": PSTAR_EDGES,
}


def named_pattern(name: str) -> QueryPattern:
    return QueryPattern.from_edges(STANDARD_PATTERNS[name])
