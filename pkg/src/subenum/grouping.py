"""Region groups: memory-bounded batches of distributed start candidates."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from .errors import ZeroDegree
from .graph import PartitionView
from .sme import LocalStats

DEFAULT_BYTES_PER_CANDIDATE = 64


@dataclass
class RegionGroup:
    members: tuple[int, ...]
    estimated_bytes: int = 0
    processed: bool = False


def proximity(v: int, rg: RegionGroup | set[int], pv: PartitionView) -> float:
    """Share of ``v``'s neighbours that neighbour some member of ``rg``.

    ``rg`` may also be given directly as the group's neighbourhood set.
    """
    adj = pv.neighbor_set(v)
    if not adj:
        raise ZeroDegree(v)
    if isinstance(rg, RegionGroup):
        hood: set[int] = set()
        for w in rg.members:
            hood |= pv.neighbor_set(w)
    else:
        hood = rg
    return len(adj & hood) / len(adj)


def average_cost(stats: LocalStats | None, default: float = DEFAULT_BYTES_PER_CANDIDATE) -> float:
    avg = stats.avg_bytes_per_candidate if stats is not None else None
    return default if avg is None else avg


def estimate_group_bytes(rg: RegionGroup | list[int] | tuple[int, ...], stats: LocalStats | None,
                         default: float = DEFAULT_BYTES_PER_CANDIDATE) -> int:
    members = rg.members if isinstance(rg, RegionGroup) else rg
    return round(len(members) * average_cost(stats, default))


def find_region_groups(
    c2: list[int],
    budget: int,
    stats: LocalStats | None,
    pv: PartitionView,
    default: float = DEFAULT_BYTES_PER_CANDIDATE,
) -> list[RegionGroup]:
    """Greedy proximity grouping of ``c2``; ``budget`` <= 0 means one group."""
    if not c2:
        return []
    if budget <= 0:
        members = tuple(sorted(c2))
        return [RegionGroup(members, estimate_group_bytes(members, stats, default))]
    cost = average_cost(stats, default)
    pool = set(c2)
    groups = []
    while pool:
        seed = min(pool)
        pool.discard(seed)
        members = [seed]
        hood = set(pv.neighbor_set(seed))
        while pool and len(members) * cost < budget:
            best = max(pool, key=lambda v: (proximity(v, hood, pv), -v))
            pool.discard(best)
            members.append(best)
            hood |= pv.neighbor_set(best)
        if len(members) > 1 and len(members) * cost > budget:
            pool.add(members.pop())
        groups.append(RegionGroup(tuple(members), round(len(members) * cost)))
    return groups


@dataclass
class GroupTable:
    """A worker's region groups with at-most-once claiming.

    Both the owner's enumeration thread and the daemon answering shareR
    claim through :meth:`claim`; the lock makes each hand-off atomic.
    """

    groups: list[RegionGroup] = field(default_factory=list)
    claims: int = 0
    shared: int = 0

    def __post_init__(self):
        self._lock = threading.Lock()

    def set_groups(self, groups: list[RegionGroup]) -> None:
        with self._lock:
            self.groups = list(groups)

    def unprocessed(self) -> int:
        with self._lock:
            return sum(1 for g in self.groups if not g.processed)

    def claim(self, remote: bool = False) -> RegionGroup | None:
        with self._lock:
            # thieves take from the back, the owner from the front
            seq = reversed(self.groups) if remote else iter(self.groups)
            for g in seq:
                if not g.processed:
                    g.processed = True
                    self.claims += 1
                    if remote:
                        self.shared += 1
                    return g
            return None
