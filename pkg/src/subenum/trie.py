"""Embedding trie, edge verification index and the per-unit expansion.

Results of a sub-pattern are stored as leaf-to-root paths in a forest keyed
by the data vertex of the first query vertex. Nodes live in parallel slot
arrays; a ``ResultId`` is a (slot, generation) pair, so ids of removed
results go stale instead of aliasing a reused slot.
"""

from __future__ import annotations

from typing import Callable, Iterable, NamedTuple

from .errors import MissingAdjacency, MissingVerdict, StaleId
from .graph import PartitionView
from .pattern import OrderConstraints, QueryPattern, _norm
from .planner import DecompositionUnit, ExecutionPlan

Edge = tuple[int, int]

# one vertex id, one parent handle, one child counter
BYTES_PER_NODE = 24


class ResultId(NamedTuple):
    slot: int
    gen: int


class EmbeddingTrie:
    def __init__(self):
        self._vertex: list[int] = []
        self._parent: list[int] = []
        self._count: list[int] = []
        self._depth: list[int] = []
        self._gen: list[int] = []
        self._alive: list[bool] = []
        self._children: list[dict[int, int] | None] = []
        self._free: list[int] = []
        self.roots: dict[int, int] = {}
        # depth -> live leaf slots (insertion ordered)
        self._leaves: dict[int, dict[int, None]] = {}
        self.live_nodes = 0
        self.peak_nodes = 0

    # -- slot management -------------------------------------------------

    def _alloc(self, v: int, parent: int) -> int:
        depth = 0 if parent < 0 else self._depth[parent] + 1
        if self._free:
            s = self._free.pop()
            self._vertex[s] = v
            self._parent[s] = parent
            self._count[s] = 0
            self._depth[s] = depth
            self._alive[s] = True
            self._children[s] = None
        else:
            s = len(self._vertex)
            self._vertex.append(v)
            self._parent.append(parent)
            self._count.append(0)
            self._depth.append(depth)
            self._gen.append(0)
            self._alive.append(True)
            self._children.append(None)
        self.live_nodes += 1
        if self.live_nodes > self.peak_nodes:
            self.peak_nodes = self.live_nodes
        return s

    def _release(self, s: int) -> None:
        self._alive[s] = False
        self._gen[s] += 1
        self._children[s] = None
        self._free.append(s)
        self.live_nodes -= 1

    def _attach(self, s: int) -> None:
        """Link a freshly allocated node under its parent (or as a root)."""
        p = self._parent[s]
        v = self._vertex[s]
        if p < 0:
            self.roots[v] = s
        else:
            kids = self._children[p]
            if kids is None:
                kids = self._children[p] = {}
            kids[v] = s
            if self._count[p] == 0:
                self._leaves.get(self._depth[p], {}).pop(p, None)
            self._count[p] += 1
        if self._count[s] == 0:
            self._leaves.setdefault(self._depth[s], {})[s] = None

    def _new_leaf(self, v: int, parent: int) -> int:
        """Allocate and attach in one step (hot path of the last expansion level)."""
        depth = self._depth[parent] + 1
        if self._free:
            s = self._alloc(v, parent)
        else:
            s = len(self._vertex)
            self._vertex.append(v)
            self._parent.append(parent)
            self._count.append(0)
            self._depth.append(depth)
            self._gen.append(0)
            self._alive.append(True)
            self._children.append(None)
            self.live_nodes += 1
            if self.live_nodes > self.peak_nodes:
                self.peak_nodes = self.live_nodes
        kids = self._children[parent]
        if kids is None:
            kids = self._children[parent] = {}
        kids[v] = s
        if self._count[parent] == 0:
            self._leaves.get(depth - 1, {}).pop(parent, None)
        self._count[parent] += 1
        level = self._leaves.get(depth)
        if level is None:
            level = self._leaves[depth] = {}
        level[s] = None
        return s

    def _discard(self, s: int) -> None:
        """Drop a node that was never attached."""
        self._release(s)

    def _id(self, s: int) -> ResultId:
        return ResultId(s, self._gen[s])

    def _check(self, rid: ResultId) -> int:
        s, g = rid
        if s >= len(self._gen) or not self._alive[s] or self._gen[s] != g:
            raise StaleId(rid)
        return s

    # -- public API ------------------------------------------------------

    def is_live(self, rid: ResultId) -> bool:
        s, g = rid
        return s < len(self._gen) and self._alive[s] and self._gen[s] == g

    def add_root(self, v: int) -> ResultId:
        s = self.roots.get(v)
        if s is None:
            s = self._alloc(v, -1)
            self._attach(s)
        return self._id(s)

    def insert_path(self, parent: ResultId | int, suffix: Iterable[int]) -> ResultId:
        """Append ``suffix`` below ``parent`` (a result id, or a root vertex)."""
        suffix = list(suffix)
        if not suffix:
            raise ValueError("suffix must be non-empty")
        if isinstance(parent, ResultId):
            s = self._check(parent)
        else:
            s = self.add_root(parent).slot
        for v in suffix:
            kids = self._children[s]
            nxt = kids.get(v) if kids else None
            if nxt is None:
                nxt = self._alloc(v, s)
                self._attach(nxt)
            s = nxt
        return self._id(s)

    def result_vertices(self, rid: ResultId) -> list[int]:
        s = self._check(rid)
        out = []
        while s >= 0:
            out.append(self._vertex[s])
            s = self._parent[s]
        out.reverse()
        return out

    def remove_result(self, rid: ResultId) -> None:
        """Remove a leaf and every ancestor left without children. Stale ids are ignored."""
        if not self.is_live(rid):
            return
        s = rid.slot
        if self._count[s]:
            raise ValueError(f"{rid} is not a leaf")
        while True:
            p = self._parent[s]
            self._leaves.get(self._depth[s], {}).pop(s, None)
            v = self._vertex[s]
            self._release(s)
            if p < 0:
                del self.roots[v]
                return
            del self._children[p][v]
            self._count[p] -= 1
            if self._count[p]:
                return
            s = p

    def frontier(self, depth: int) -> list[ResultId]:
        """Live leaves at ``depth`` (results of length depth + 1)."""
        return [self._id(s) for s in self._leaves.get(depth, ())]

    def leaf_count(self, depth: int | None = None) -> int:
        if depth is None:
            return sum(len(d) for d in self._leaves.values())
        return len(self._leaves.get(depth, ()))

    def results(self, depth: int) -> list[list[int]]:
        return [self.result_vertices(r) for r in self.frontier(depth)]

    def node_count(self) -> int:
        return self.live_nodes

    def bytes(self) -> int:
        return self.live_nodes * BYTES_PER_NODE

    def clear(self) -> None:
        self.__init__()

    def audit(self) -> None:
        """Recount children from parent pointers and check every stored invariant."""
        live = [s for s, a in enumerate(self._alive) if a]
        counts = {s: 0 for s in live}
        for s in live:
            p = self._parent[s]
            if p >= 0:
                assert self._alive[p], f"node {s} has dead parent {p}"
                counts[p] += 1
                assert self._children[p][self._vertex[s]] == s
            else:
                assert self.roots[self._vertex[s]] == s
        for s in live:
            assert counts[s] == self._count[s], f"child_count mismatch at {s}"
            kids = self._children[s] or {}
            assert len(kids) == counts[s]
            in_index = s in self._leaves.get(self._depth[s], {})
            assert in_index == (counts[s] == 0), f"leaf index wrong at {s}"
        assert len(live) == self.live_nodes
        indexed = sum(len(d) for d in self._leaves.values())
        assert indexed == sum(1 for s in live if counts[s] == 0)


class EdgeVerificationIndex:
    """Undetermined data edge -> ids of the results that depend on it."""

    def __init__(self):
        self.entries: dict[Edge, set[ResultId]] = {}

    def add(self, a: int, b: int, rid: ResultId) -> None:
        self.entries.setdefault(_norm(a, b), set()).add(rid)

    def keys(self):
        return self.entries.keys()

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, e) -> bool:
        return e in self.entries

    def __getitem__(self, e) -> set[ResultId]:
        return self.entries[e]

    def clear(self) -> None:
        self.entries.clear()


def filter_failed(evi: EdgeVerificationIndex, verdicts: dict[Edge, bool], trie: EmbeddingTrie) -> int:
    """Remove every result indicted by a failed edge, then clear the index.

    Returns the number of live results removed.
    """
    missing = [e for e in evi.keys() if e not in verdicts]
    if missing:
        raise MissingVerdict(missing[0])
    removed = 0
    for e, ids in evi.entries.items():
        if verdicts[e]:
            continue
        for rid in ids:
            if trie.is_live(rid):
                trie.remove_result(rid)
                removed += 1
    evi.clear()
    return removed


class UnitExpander:
    """Expands results of P_{i-1} by one decomposition unit.

    ``known`` holds verdicts of edges verified earlier; a known edge is
    resolved locally instead of being put into the index again.

    When ``on_final`` is set, complete results with no undetermined edge are
    handed to it (as the query-vertex mapping) instead of being stored. With
    ``count_final`` they are only counted, in ``final_hits``.
    """

    def __init__(
        self,
        pv: PartitionView,
        p: QueryPattern,
        plan: ExecutionPlan,
        index: int,
        constraints: OrderConstraints,
        known: dict[Edge, bool] | None = None,
    ):
        self.pv = pv
        self.unit: DecompositionUnit = plan.units[index]
        self.constraints = constraints
        self.known = known if known is not None else {}
        order = plan.matching_order
        self.order = order
        self.pos = {u: i for i, u in enumerate(order)}
        leaves = self.unit.leaves
        self.leaves = leaves
        prev = set(order[: plan.prefix_size(index - 1)]) if index > 0 else {self.unit.piv}
        self.cro_prev = [
            [w for w in sorted(prev) if w != self.unit.piv and p.has_edge(w, u)] for u in leaves
        ]
        self.sib_prev = [[w for w in leaves[:k] if p.has_edge(w, u)] for k, u in enumerate(leaves)]
        self.verify = [c + s for c, s in zip(self.cro_prev, self.sib_prev)]
        self.min_degree = [p.degree(u) for u in leaves]
        self.check_edges = self.unit.e_sib + self.unit.e_cro
        self.on_final: Callable[[dict[int, int]], None] | None = None
        self.count_final = False
        self.final_hits = 0

    def expand(self, f: ResultId, trie: EmbeddingTrie, evi: EdgeVerificationIndex) -> bool:
        """Grow ``f`` into every candidate of P_i; ``f`` is removed if none exists."""
        pv = self.pv
        prefix = trie.result_vertices(f)
        mapping = dict(zip(self.order, prefix))
        piv_set = pv.local_set(mapping[self.unit.piv])
        if piv_set is None:
            raise MissingAdjacency(mapping[self.unit.piv])
        cands = []
        for k in range(len(self.leaves)):
            c = piv_set
            for w in self.cro_prev[k]:
                s = pv.local_set(mapping[w])
                if s is not None:
                    c = c & s
            if not c:
                trie.remove_result(f)
                return False
            cands.append(c)
        self._trie = trie
        self._evi = evi
        self._cands = cands
        self._mapping = mapping
        self._used = set(prefix)
        found = self._adj_enum(f.slot, 0)
        if not found:
            trie.remove_result(f)
        return found

    def _undetermined(self) -> list[Edge] | None:
        """Undetermined verification edges of the full mapping; None if one is known absent."""
        pv = self.pv
        m = self._mapping
        out = []
        for a, b in self.check_edges:
            x, y = m[a], m[b]
            if pv.is_local(x) or pv.is_local(y):
                continue
            e = _norm(x, y)
            verdict = self.known.get(e)
            if verdict is None:
                out.append(e)
            elif not verdict:
                return None
        return out

    def _adj_enum(self, node: int, k: int) -> bool:
        pv = self.pv
        sets_get = pv._sets.get
        cache_get = pv.cache.get_set
        mapping = self._mapping
        used = self._used
        u = self.leaves[k]
        cand = self._cands[k]
        for w in self.sib_prev[k]:
            s = sets_get(mapping[w])
            if s is None:
                s = cache_get(mapping[w])
            if s is not None:
                cand = cand & s
        need = self.min_degree[k]
        verify = self.verify[k]
        lo, hi = self.constraints.bounds(u, mapping)
        last = k == len(self.leaves) - 1
        ok = []
        for v in (cand if last else sorted(cand)):
            if v in used or not lo < v < hi:
                continue
            s_v = sets_get(v)
            if s_v is None:
                s_v = cache_get(v)
            if s_v is not None:
                if len(s_v) < need:
                    continue
                if verify and any(mapping[w] not in s_v for w in verify):
                    continue
            ok.append(v)
        if not ok:
            return False
        trie = self._trie
        if last:
            if not self.check_edges and self.count_final:
                self.final_hits += len(ok)
                return True
            return self._emit(node, u, ok)
        found = False
        for v in ok:
            mapping[u] = v
            used.add(v)
            child = trie._alloc(v, node)
            if self._adj_enum(child, k + 1):
                trie._attach(child)
                found = True
            else:
                trie._discard(child)
            used.discard(v)
            del mapping[u]
        return found

    def _emit(self, node: int, u: int, ok: list[int]) -> bool:
        trie = self._trie
        mapping = self._mapping
        on_final = self.on_final
        entries = self._evi.entries
        found = False
        for v in ok:
            mapping[u] = v
            und = self._undetermined() if self.check_edges else ()
            if und is not None:
                if und:
                    rid = trie._id(trie._new_leaf(v, node))
                    for e in und:
                        entries.setdefault(e, set()).add(rid)
                elif self.count_final:
                    self.final_hits += 1
                elif on_final is not None:
                    on_final(mapping)
                else:
                    trie._new_leaf(v, node)
                found = True
        del mapping[u]
        return found


def expand_embed_trie(
    f: ResultId,
    pv: PartitionView,
    p: QueryPattern,
    plan: ExecutionPlan,
    index: int,
    trie: EmbeddingTrie,
    evi: EdgeVerificationIndex,
    constraints: OrderConstraints,
) -> EdgeVerificationIndex:
    """One-shot form of :class:`UnitExpander` for a single result."""
    UnitExpander(pv, p, plan, index, constraints).expand(f, trie, evi)
    return evi
