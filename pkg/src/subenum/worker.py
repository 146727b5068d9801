"""Per-worker driver: local enumeration, then region groups round by round.

A group is processed in one round per decomposition unit. Each round
expands the frontier of the trie, verifies the edges nobody local can
decide, and drops the results those edges indict. Foreign pivot vertices
are fetched at the start of a round and the cache is trimmed at its end.
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Iterable

from .graph import PartitionView
from .grouping import DEFAULT_BYTES_PER_CANDIDATE, GroupTable, RegionGroup, find_region_groups
from .pattern import QueryPattern, symmetry_constraints
from .planner import ExecutionPlan, select_plan
from .sme import Embedding, LocalStats, local_enumerate, split_candidates, to_canonical
from .transport import (
    Daemon,
    LoopbackNetwork,
    Transport,
    fetch_vertices,
    steal_work,
    verify_edges,
)
from .trie import EdgeVerificationIndex, EmbeddingTrie, ResultId, UnitExpander, filter_failed
from .wire import Kind

log = logging.getLogger(__name__)

Edge = tuple[int, int]


@dataclass
class WorkerConfig:
    rho: float = 1.0
    memory_budget: int = 0
    cache_budget: int = 0
    transport: str = "loopback"
    emit: str = "count"
    bytes_per_candidate: float = DEFAULT_BYTES_PER_CANDIDATE
    # fault injection for tests: accept every undetermined edge unchecked
    skip_verify: bool = False

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if self.memory_budget < 0 or self.cache_budget < 0:
            raise ValueError("budgets must be >= 0 (0 means unbounded)")
        if self.transport not in ("loopback", "tcp"):
            raise ValueError(f"unknown transport {self.transport!r}")
        if self.emit not in ("count", "results"):
            raise ValueError(f"unknown emit mode {self.emit!r}")


def collect_pivot_targets(trie: EmbeddingTrie, frontier: Iterable[ResultId], position: int) -> set[int]:
    """Data vertices at ``position`` across the frontier results."""
    return {trie.result_vertices(f)[position] for f in frontier}


def cache_evict(pv: PartitionView, cfg: WorkerConfig) -> list[int]:
    pv.cache.budget = cfg.cache_budget
    return pv.cache.evict()


@dataclass
class WorkerStats:
    local_results: int = 0
    distributed_results: int = 0
    groups_own: int = 0
    groups_stolen: int = 0
    rounds: int = 0
    removed_by_filter: int = 0
    peak_trie_nodes: int = 0
    evicted: int = 0
    # largest number of times any single edge was sent for verification in one round
    max_edge_repeats_per_round: int = 0


class Worker:
    def __init__(self, pv: PartitionView, p: QueryPattern, cfg: WorkerConfig,
                 transport: Transport, table: GroupTable | None = None,
                 plan: ExecutionPlan | None = None):
        self.pv = pv
        self.p = p
        self.cfg = cfg
        self.transport = transport
        self.table = table if table is not None else GroupTable()
        self.plan = plan if plan is not None else select_plan(p, cfg.rho)
        self.constraints = symmetry_constraints(p)
        self.known: dict[Edge, bool] = {}
        self.stats = WorkerStats()
        self.local_stats = LocalStats()
        self.c1: list[int] = []
        self.c2: list[int] = []
        self.results: list[Embedding] = []
        self._expanders = [
            UnitExpander(pv, p, self.plan, i, self.constraints, self.known)
            for i in range(len(self.plan.units))
        ]
        # final-round results that need no verification skip the trie
        last = self._expanders[-1]
        if cfg.emit == "results":
            vertices = p.vertices
            last.on_final = lambda m: self.results.append(tuple(m[u] for u in vertices))
        else:
            last.count_final = True
        pv.cache.budget = cfg.cache_budget

    @property
    def machine_id(self) -> int:
        return self.pv.machine_id

    @property
    def count(self) -> int:
        return self.stats.local_results + self.stats.distributed_results

    # -- phases ----------------------------------------------------------

    def prepare(self, demote: Iterable[int] = ()) -> list[RegionGroup]:
        """Split candidates, enumerate the local ones, build region groups.

        ``demote`` moves chosen local candidates to the distributed side.
        """
        start = self.plan.matching_order[0]
        c1, c2 = split_candidates(self.pv, self.p, start)
        demote = set(demote)
        if demote:
            c1, c2 = [v for v in c1 if v not in demote], sorted(c2 + [v for v in c1 if v in demote])
        self.c1, self.c2 = c1, c2
        embs, self.local_stats = local_enumerate(self.pv, self.p, self.plan, c1, self.constraints)
        self.stats.local_results += len(embs)
        if self.cfg.emit == "results":
            order = self.plan.matching_order
            self.results.extend(to_canonical(self.p, order, e) for e in embs)
        groups = find_region_groups(c2, self.cfg.memory_budget, self.local_stats, self.pv,
                                    self.cfg.bytes_per_candidate)
        self.table.set_groups(groups)
        log.debug("machine %d: |C1|=%d |C2|=%d groups=%d local=%d",
                  self.machine_id, len(c1), len(c2), len(groups), len(embs))
        return groups

    def process_own_groups(self) -> None:
        while (g := self.table.claim()) is not None:
            self.stats.groups_own += 1
            self.run_region_group(g.members)

    def steal_loop(self) -> None:
        while (g := steal_work(self.transport)) is not None:
            self.stats.groups_stolen += 1
            self.run_region_group(g.members)

    def run(self) -> int:
        self.process_own_groups()
        self.steal_loop()
        return self.count

    # -- one region group ------------------------------------------------

    def _verify_and_filter(self, evi: EdgeVerificationIndex, trie: EmbeddingTrie) -> None:
        if not len(evi):
            return
        edges = list(evi.keys())
        if self.cfg.skip_verify:
            verdicts = {e: True for e in edges}
        else:
            before = {e: self.transport.counters.verified[e] for e in edges}
            verdicts = verify_edges(edges, self.pv, self.transport)
            after = self.transport.counters.verified
            repeats = max((after[e] - before[e] for e in edges), default=0)
            self.stats.max_edge_repeats_per_round = max(self.stats.max_edge_repeats_per_round, repeats)
            self.known.update(verdicts)
        self.stats.removed_by_filter += filter_failed(evi, verdicts, trie)

    def run_region_group(self, members: Iterable[int]) -> int:
        """Enumerate every embedding whose first query vertex maps into ``members``."""
        plan = self.plan
        pv = self.pv
        members = sorted(members)
        emitted_before, hits_before = len(self.results), self._expanders[-1].final_hits
        trie = EmbeddingTrie()
        evi = EdgeVerificationIndex()
        # a stolen group's seeds are foreign to us
        fetch_vertices([v for v in members if not pv.is_owned(v)], pv, self.transport)
        for i, expander in enumerate(self._expanders):
            self.stats.rounds += 1
            if i == 0:
                frontier = [trie.add_root(v) for v in members]
            else:
                frontier = trie.frontier(plan.prefix_size(i - 1) - 1)
                if not frontier:
                    break
                pos = plan.position(plan.units[i].piv)
                targets = collect_pivot_targets(trie, frontier, pos)
                fetch_vertices([v for v in targets if not pv.is_local(v)], pv, self.transport)
            evi.clear()
            for f in frontier:
                expander.expand(f, trie, evi)
            self._verify_and_filter(evi, trie)
            self.stats.evicted += len(cache_evict(pv, self.cfg))
        self.stats.peak_trie_nodes = max(self.stats.peak_trie_nodes, trie.peak_nodes)
        depth = len(self.p.vertices) - 1
        if self.cfg.emit == "results":
            order = plan.matching_order
            for rid in trie.frontier(depth):
                self.results.append(to_canonical(self.p, order, tuple(trie.result_vertices(rid))))
            found = len(self.results) - emitted_before
        else:
            found = trie.leaf_count(depth) + self._expanders[-1].final_hits - hits_before
        self.stats.distributed_results += found
        return found

    def summary(self) -> dict:
        return {
            "machine": self.machine_id,
            "count": self.count,
            "local": self.stats.local_results,
            "distributed": self.stats.distributed_results,
            "groups_own": self.stats.groups_own,
            "groups_stolen": self.stats.groups_stolen,
            "peak_trie_nodes": self.stats.peak_trie_nodes,
            "counters": self.transport.counters.as_dict(),
        }


@dataclass
class ClusterResult:
    count: int
    per_worker: list[int]
    workers: list[Worker] = field(repr=False, default_factory=list)
    groups_created: int = 0
    groups_claimed: int = 0
    groups_shared: int = 0
    elapsed: float = 0.0

    @property
    def peak_trie_nodes(self) -> int:
        return max((w.stats.peak_trie_nodes for w in self.workers), default=0)

    @property
    def results(self) -> list[Embedding]:
        return [e for w in self.workers for e in w.results]

    def enumeration_messages(self) -> int:
        """Data requests (verifyE, fetchV) sent; work-stealing probes are not counted."""
        kinds = (Kind.VERIFY_E_REQ, Kind.FETCH_V_REQ)
        return sum(w.transport.counters.sent[k] for w in self.workers for k in kinds)

    def summary(self) -> dict:
        return {
            "count": self.count,
            "per_worker": self.per_worker,
            "peak_trie_nodes": self.peak_trie_nodes,
            "groups": {"created": self.groups_created, "claimed": self.groups_claimed,
                       "shared": self.groups_shared},
            "workers": [w.summary() for w in self.workers],
            "elapsed_s": round(self.elapsed, 6),
        }


def run_cluster_loopback(
    views: list[PartitionView],
    p: QueryPattern,
    cfg: WorkerConfig | None = None,
    concurrent: bool = True,
    demote: dict[int, Iterable[int]] | None = None,
    plan: ExecutionPlan | None = None,
) -> ClusterResult:
    """Run every worker in this process over loopback daemons.

    All workers finish their local phase and publish their groups before any
    of them starts on groups, so stealing sees complete tables. With
    ``concurrent=False`` workers run one after another, which is
    deterministic: earlier workers steal everything that is left.
    """
    cfg = cfg or WorkerConfig()
    plan = plan if plan is not None else select_plan(p, cfg.rho)
    t0 = time.perf_counter()
    net = LoopbackNetwork()
    tables = [GroupTable() for _ in views]
    for pv, table in zip(views, tables):
        net.serve(Daemon(pv, table))
    workers = [Worker(pv, p, cfg, net.transport(pv.machine_id), table, plan)
               for pv, table in zip(views, tables)]
    try:
        for w in workers:
            w.prepare((demote or {}).get(w.machine_id, ()))
        created = sum(len(t.groups) for t in tables)
        if concurrent and len(workers) > 1:
            errors: list[BaseException] = []

            def body(w: Worker) -> None:
                try:
                    w.run()
                except BaseException as exc:  # surfaced in the caller
                    errors.append(exc)

            threads = [threading.Thread(target=body, args=(w,), name=f"worker-{w.machine_id}")
                       for w in workers]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
            if errors:
                raise errors[0]
        else:
            for w in workers:
                w.run()
    finally:
        net.shutdown()
    per = [w.count for w in workers]
    return ClusterResult(
        count=sum(per),
        per_worker=per,
        workers=workers,
        groups_created=created,
        groups_claimed=sum(t.claims for t in tables),
        groups_shared=sum(t.shared for t in tables),
        elapsed=time.perf_counter() - t0,
    )
