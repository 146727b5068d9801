"""Execution plans: minimum-round decompositions of a query pattern.

Every plan with the fewest units has one unit per vertex of a minimum
connected dominating set (MCDS), so plans are enumerated exhaustively from
the MCDSs and then ranked: smallest span of the first pivot, then the
score with the pivot-degree term, then the bare verification-edge score,
then lexicographic.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from fractions import Fraction

from .errors import NotAPlan, PatternTooLarge
from .pattern import MAX_BRUTE_FORCE, QueryPattern, _norm, span

Edge = tuple[int, int]

# exhaustive spanning-tree search is skipped above this many edge subsets
MLST_SEARCH_LIMIT = 250_000


@dataclass(frozen=True)
class DecompositionUnit:
    piv: int
    leaves: tuple[int, ...]
    e_star: tuple[Edge, ...] = ()
    e_sib: tuple[Edge, ...] = ()
    e_cro: tuple[Edge, ...] = ()

    @property
    def vertices(self) -> tuple[int, ...]:
        return (self.piv, *self.leaves)

    @property
    def verification_edges(self) -> tuple[Edge, ...]:
        return self.e_sib + self.e_cro


@dataclass(frozen=True)
class ExecutionPlan:
    units: tuple[DecompositionUnit, ...]
    rho: float = 1.0
    matching_order: tuple[int, ...] = ()

    def __len__(self) -> int:
        return len(self.units)

    @property
    def pivots(self) -> tuple[int, ...]:
        return tuple(d.piv for d in self.units)

    def prefix_size(self, i: int) -> int:
        """Number of query vertices in the sub-pattern after unit ``i``."""
        return 1 + sum(len(d.leaves) for d in self.units[: i + 1])

    def position(self, u: int) -> int:
        return self.matching_order.index(u)


def _dominates(p: QueryPattern, d: frozenset[int]) -> bool:
    covered = set(d)
    for u in d:
        covered |= p.adj[u]
    return len(covered) == len(p.vertices)


def _induced_connected(p: QueryPattern, d: frozenset[int]) -> bool:
    start = next(iter(d))
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for w in p.adj[u] & d:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(d)


def max_leaf_spanning_tree(p: QueryPattern) -> tuple[frozenset[Edge], int] | None:
    """Exhaustive maximum-leaf spanning tree, or None when the search is too big."""
    n = len(p.vertices)
    edges = sorted(p.edges)
    if math.comb(len(edges), n - 1) > MLST_SEARCH_LIMIT:
        return None
    best: tuple[frozenset[Edge], int] | None = None
    for subset in itertools.combinations(edges, n - 1):
        parent = {u: u for u in p.vertices}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        acyclic = True
        for a, b in subset:
            ra, rb = find(a), find(b)
            if ra == rb:
                acyclic = False
                break
            parent[ra] = rb
        if not acyclic:
            continue
        deg = dict.fromkeys(p.vertices, 0)
        for a, b in subset:
            deg[a] += 1
            deg[b] += 1
        leaves = sum(1 for d in deg.values() if d == 1)
        if best is None or leaves > best[1]:
            best = (frozenset(subset), leaves)
    return best


def connected_dominating_number(p: QueryPattern) -> tuple[int, list[frozenset[int]]]:
    """Connected domination number and every MCDS, smallest size first."""
    n = len(p.vertices)
    if n > MAX_BRUTE_FORCE:
        raise PatternTooLarge(f"{n} vertices > {MAX_BRUTE_FORCE}")
    for k in range(1, n + 1):
        found = [
            frozenset(c)
            for c in itertools.combinations(p.vertices, k)
            if _dominates(p, frozenset(c)) and _induced_connected(p, frozenset(c))
        ]
        if found:
            break
    if n >= 3:
        mlst = max_leaf_spanning_tree(p)
        if mlst is not None and n != k + mlst[1]:
            raise AssertionError(f"|V|={n} but c_P={k}, l_P={mlst[1]}")
    return k, found


def _pivot_orderings(p: QueryPattern, mcds: frozenset[int]):
    """Orderings of ``mcds`` where every pivot after the first touches an earlier one."""
    members = sorted(mcds)

    def grow(seq: list[int]):
        if len(seq) == len(members):
            yield tuple(seq)
            return
        for w in members:
            if w not in seq and p.adj[w] & set(seq):
                seq.append(w)
                yield from grow(seq)
                seq.pop()

    for first in members:
        yield from grow([first])


def classify_edges(plan: ExecutionPlan, p: QueryPattern) -> ExecutionPlan:
    """Fill each unit's expansion, sibling and cross-unit edge sets."""
    placed: set[int] = set()
    units = []
    for i, d in enumerate(plan.units):
        if i == 0:
            placed.add(d.piv)
        elif d.piv not in placed:
            raise NotAPlan(f"pivot {d.piv} of unit {i} is not in the previous sub-pattern")
        lf = set(d.leaves)
        if not lf or lf & placed:
            raise NotAPlan(f"unit {i} leaves must be non-empty and new")
        for w in lf:
            if not p.has_edge(d.piv, w):
                raise NotAPlan(f"leaf {w} of unit {i} is not adjacent to pivot {d.piv}")
        star = tuple(_norm(d.piv, w) for w in d.leaves)
        sib = tuple(sorted(_norm(a, b) for a, b in itertools.combinations(d.leaves, 2) if p.has_edge(a, b)))
        cro = tuple(sorted(
            _norm(a, w) for w in d.leaves for a in placed if a != d.piv and p.has_edge(a, w)
        ))
        units.append(replace(d, e_star=star, e_sib=sib, e_cro=cro))
        placed |= lf
    if placed != set(p.vertices):
        raise NotAPlan("units do not cover the pattern")
    return replace(plan, units=tuple(units))


def enumerate_min_plans(p: QueryPattern, rho: float = 1.0) -> list[ExecutionPlan]:
    """All execution plans with exactly c_P units, edges classified."""
    _, mcdss = connected_dominating_number(p)
    plans = []
    for mcds in mcdss:
        for pivots in _pivot_orderings(p, mcds):
            rank = {u: i for i, u in enumerate(pivots)}
            options: list[list[int]] = []
            for w in p.vertices:
                if w == pivots[0]:
                    options.append([-1])
                    continue
                adjacent = sorted(rank[x] for x in p.adj[w] if x in rank)
                if w in rank:
                    # a later pivot may hang off any earlier adjacent pivot
                    options.append([j for j in adjacent if j < rank[w]])
                else:
                    options.append(adjacent[:1])
            for choice in itertools.product(*options):
                leaves: list[list[int]] = [[] for _ in pivots]
                for w, j in zip(p.vertices, choice):
                    if j >= 0:
                        leaves[j].append(w)
                if not all(leaves):
                    continue
                units = tuple(DecompositionUnit(piv, tuple(lf)) for piv, lf in zip(pivots, leaves))
                plan = classify_edges(ExecutionPlan(units, rho), p)
                plans.append(with_matching_order(plan, p))
    return plans


def score_plan(plan: ExecutionPlan, rho: float | None = None) -> float:
    """Verification edges per round, weighted by 1/(i+1)^rho."""
    rho = plan.rho if rho is None else rho
    return sum((len(d.e_sib) + len(d.e_cro)) / (i + 1) ** rho for i, d in enumerate(plan.units))


def exact_score(plan: ExecutionPlan) -> Fraction:
    """The rho=1 score as an exact fraction."""
    return sum((Fraction(len(d.e_sib) + len(d.e_cro), i + 1) for i, d in enumerate(plan.units)), Fraction(0))


def degree_score(plan: ExecutionPlan, p: QueryPattern) -> float:
    return sum(p.degree(d.piv) / (i + 1) for i, d in enumerate(plan.units))


def extended_score(plan: ExecutionPlan, p: QueryPattern, rho: float | None = None) -> float:
    return score_plan(plan, rho) + degree_score(plan, p)


def _lex_key(plan: ExecutionPlan):
    return tuple((d.piv, tuple(sorted(d.leaves))) for d in plan.units)


def _rank_key(plan: ExecutionPlan, p: QueryPattern, rho: float):
    # rounding keeps float noise from breaking ties for arbitrary rho
    return (
        len(plan.units),
        span(p, plan.units[0].piv),
        -round(extended_score(plan, p, rho), 9),
        -round(score_plan(plan, rho), 9),
        _lex_key(plan),
    )


def rank_plans(plans, p: QueryPattern, rho: float = 1.0) -> list[ExecutionPlan]:
    """Best plan first: fewest units, smallest first-pivot span, then scores.

    The degree-aware score ranks ahead of the bare one, so a plan that puts
    high-degree pivots early can beat one with slightly more early checks.
    """
    return sorted(plans, key=lambda pl: _rank_key(pl, p, rho))


def select_plan(p: QueryPattern, rho: float = 1.0, root: int | None = None) -> ExecutionPlan:
    """Best minimum-unit plan; ``root`` pins the first pivot."""
    plans = enumerate_min_plans(p, rho)
    if root is not None:
        plans = [pl for pl in plans if pl.units[0].piv == root]
        if not plans:
            raise NotAPlan(f"no minimum plan starts at u{root}")
    return rank_plans(plans, p, rho)[0]


def matching_order(plan: ExecutionPlan, p: QueryPattern) -> tuple[int, ...]:
    """Strict total order over the pattern vertices, unit by unit.

    Within a unit, leaves that pivot a later unit come first (in unit
    order), then the rest by descending pattern degree and ascending id.
    The leaves of each unit in the returned plan follow the same order.
    """
    pivot_rank = {d.piv: i for i, d in enumerate(plan.units)}
    order = [plan.units[0].piv]
    for d in plan.units:
        later = sorted((w for w in d.leaves if w in pivot_rank), key=pivot_rank.__getitem__)
        rest = sorted((w for w in d.leaves if w not in pivot_rank), key=lambda w: (-p.degree(w), w))
        order.extend(later + rest)
    return tuple(order)


def with_matching_order(plan: ExecutionPlan, p: QueryPattern) -> ExecutionPlan:
    order = matching_order(plan, p)
    pos = {u: i for i, u in enumerate(order)}
    units = tuple(replace(d, leaves=tuple(sorted(d.leaves, key=pos.__getitem__))) for d in plan.units)
    return replace(plan, units=units, matching_order=order)


def format_plan(plan: ExecutionPlan, p: QueryPattern) -> str:
    def es(edges):
        return "{" + ", ".join(f"(u{a},u{b})" for a, b in edges) + "}"

    lines = []
    for i, d in enumerate(plan.units):
        lines.append(
            f"dp{i}: piv=u{d.piv} leaves=[{', '.join(f'u{w}' for w in d.leaves)}] "
            f"star={es(d.e_star)} sib={es(d.e_sib)} cro={es(d.e_cro)}"
        )
    lines.append("order: " + " ".join(f"u{u}" for u in plan.matching_order))
    lines.append(f"span(dp0.piv): {span(p, plan.units[0].piv)}")
    lines.append(f"score(rho={plan.rho:g}): {score_plan(plan):.6f}")
    lines.append(f"score+degree: {extended_score(plan, p):.6f}")
    return "\n".join(lines)
