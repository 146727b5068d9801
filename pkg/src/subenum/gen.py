"""Seeded random data graphs for tests and experiments."""

from __future__ import annotations

import random

from .graph import Adjacency


def random_graph(n: int, avg_degree: float, seed: int) -> Adjacency:
    """G(n, p) with p chosen for the requested average degree."""
    rng = random.Random(seed)
    p = min(1.0, avg_degree / max(n - 1, 1))
    nbrs: dict[int, set[int]] = {v: set() for v in range(n)}
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < p:
                nbrs[a].add(b)
                nbrs[b].add(a)
    return {v: tuple(sorted(s)) for v, s in nbrs.items()}


def complete_graph(n: int) -> Adjacency:
    return {v: tuple(w for w in range(n) if w != v) for v in range(n)}


def edge_count(graph: Adjacency) -> int:
    return sum(len(a) for a in graph.values()) // 2


def expected_matches(n: int, avg_degree: float, vertices: int, edges: int, automorphisms: int) -> float:
    """Mean number of embeddings of a pattern in G(n, p), one per automorphism class."""
    p = min(1.0, avg_degree / max(n - 1, 1))
    falling = 1.0
    for k in range(vertices):
        falling *= max(n - k, 0)
    return falling * p**edges / automorphisms


def _heaviest(n: int, d: float) -> float:
    # 5-vertex path and the 10-vertex running-example pattern dominate the sweep
    return expected_matches(n, d, 5, 4, 2) + expected_matches(n, d, 10, 14, 4)


def sweep_instances(count: int = 50, n_range=(20, 200), degree_range=(2.0, 10.0),
                    seed: int = 0, work_cap: float = 60_000.0):
    """``count`` seeded (n, avg_degree, graph_seed) triples covering both ranges.

    Sizes are evenly spaced; degrees come from a shuffled even grid, lowered
    where the expected number of matches would exceed ``work_cap``. One
    instance is pinned at the top degree on the size where that is cheapest,
    so both range ends are always present.
    """
    rng = random.Random(seed)
    lo_n, hi_n = n_range
    lo_d, hi_d = degree_range
    sizes = [round(lo_n + (hi_n - lo_n) * i / max(count - 1, 1)) for i in range(count)]
    grid = [lo_d + (hi_d - lo_d) * i / max(count - 1, 1) for i in range(count)]
    rng.shuffle(grid)
    pinned = min(range(count), key=lambda i: _heaviest(sizes[i], hi_d))
    out = []
    for i, (n, d) in enumerate(zip(sizes, grid)):
        if i == pinned:
            d = hi_d
        else:
            lo, hi = lo_d, d
            if _heaviest(n, hi) > work_cap:
                for _ in range(40):
                    mid = (lo + hi) / 2
                    lo, hi = (mid, hi) if _heaviest(n, mid) <= work_cap else (lo, mid)
                d = lo
        out.append((n, round(d, 3), 1000 + i))
    return out
