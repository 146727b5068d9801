"""Graph, ownership and partition-view files.

Graph files hold one adjacency list per line: the vertex first, then its
neighbours. Ownership files hold ``v machine`` per line and renumbering
files ``orig dense`` per line.
"""

from __future__ import annotations

from pathlib import Path

from .errors import BadPartId, LengthMismatch, ParseError
from .graph import Adjacency, ForeignCache, PartitionView

OWNERSHIP_FILE = "ownership.txt"
RENUMBER_FILE = "renumber.txt"


def _view_file(t: int) -> str:
    return f"part-{t}.adj"


def parse_graph(text: str) -> Adjacency:
    """Parse adjacency-list text; the result is symmetric, sorted and loop-free."""
    nbrs: dict[int, set[int]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            ids = [int(tok) for tok in line.split()]
        except ValueError:
            raise ParseError(f"non-integer token in {line!r}", lineno) from None
        if any(x < 0 for x in ids):
            raise ParseError("vertex ids must be non-negative", lineno)
        v, rest = ids[0], ids[1:]
        nbrs.setdefault(v, set())
        for w in rest:
            if w == v:
                continue  # self-loops never take part in an embedding
            nbrs[v].add(w)
            nbrs.setdefault(w, set()).add(v)
    return {v: tuple(sorted(s)) for v, s in sorted(nbrs.items())}


def load_graph(path: str | Path) -> Adjacency:
    return parse_graph(Path(path).read_text())


def format_graph(graph: Adjacency) -> str:
    return "".join(" ".join(map(str, (v, *graph[v]))) + "\n" for v in sorted(graph))


def renumber(graph: Adjacency) -> tuple[Adjacency, dict[int, int]]:
    """Map ids densely onto 0..n-1 in ascending order; returns (graph, orig -> dense)."""
    dense = {v: i for i, v in enumerate(sorted(graph))}
    out = {dense[v]: tuple(sorted(dense[w] for w in nbrs)) for v, nbrs in graph.items()}
    return dict(sorted(out.items())), dense


def hash_partition(graph: Adjacency, m: int) -> dict[int, int]:
    if m < 1:
        raise ValueError("need at least one machine")
    return {v: v % m for v in graph}


def load_metis_partition(path: str | Path, graph: Adjacency) -> dict[int, int]:
    """Read a METIS part file: line i is the part of (dense) vertex i."""
    parts = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        try:
            parts.append(int(line))
        except ValueError:
            raise ParseError(f"expected a part id, got {line!r}", lineno) from None
    if len(parts) != len(graph):
        raise LengthMismatch(f"{len(parts)} part ids for {len(graph)} vertices")
    ids = sorted(set(parts))
    if ids and (ids[0] != 0 or ids[-1] != len(ids) - 1):
        missing = sorted(set(range(ids[-1] + 1)) - set(ids))
        raise BadPartId(f"part ids must be contiguous from 0; found {ids}, missing {missing}")
    verts = sorted(graph)
    if verts != list(range(len(verts))):
        raise ParseError("partition files need a densely numbered graph; renumber first")
    return dict(zip(verts, parts))


def write_partition_views(graph: Adjacency, ownership: dict[int, int], out_dir: str | Path,
                          renumbering: dict[int, int] | None = None) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    missing = [v for nbrs in graph.values() for v in nbrs if v not in ownership]
    missing += [v for v in graph if v not in ownership]
    if missing:
        raise ValueError(f"vertex {missing[0]} has no owner")
    m = max(ownership.values(), default=-1) + 1
    parts: list[dict[int, tuple[int, ...]]] = [{} for _ in range(m)]
    for v, nbrs in graph.items():
        parts[ownership[v]][v] = nbrs
    paths = []
    for t, part in enumerate(parts):
        path = out / _view_file(t)
        path.write_text(format_graph(part))
        paths.append(path)
    (out / OWNERSHIP_FILE).write_text("".join(f"{v} {ownership[v]}\n" for v in sorted(ownership)))
    if renumbering is not None:
        (out / RENUMBER_FILE).write_text("".join(f"{o} {d}\n" for o, d in sorted(renumbering.items())))
    return paths


def _read_pairs(path: Path) -> dict[int, int]:
    out = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        try:
            a, b = map(int, line.split())
        except ValueError:
            raise ParseError(f"{path.name}: expected two integers, got {line!r}", lineno) from None
        out[a] = b
    return out


def load_ownership(parts_dir: str | Path) -> dict[int, int]:
    return _read_pairs(Path(parts_dir) / OWNERSHIP_FILE)


def load_renumbering(parts_dir: str | Path) -> dict[int, int] | None:
    """orig -> dense, or None when the directory has no renumbering file."""
    path = Path(parts_dir) / RENUMBER_FILE
    return _read_pairs(path) if path.exists() else None


def load_partition_view(parts_dir: str | Path, t: int, ownership: dict[int, int] | None = None,
                        cache_budget: int = 0) -> PartitionView:
    d = Path(parts_dir)
    ownership = ownership if ownership is not None else load_ownership(d)
    local: dict[int, tuple[int, ...]] = {}
    for lineno, raw in enumerate((d / _view_file(t)).read_text().splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        try:
            ids = [int(x) for x in line.split()]
        except ValueError:
            raise ParseError(f"{_view_file(t)}: non-integer token", lineno) from None
        local[ids[0]] = tuple(ids[1:])
    return PartitionView(t, local, ownership, ForeignCache(cache_budget))


def load_partition_views(parts_dir: str | Path, cache_budget: int = 0) -> list[PartitionView]:
    ownership = load_ownership(parts_dir)
    m = max(ownership.values(), default=-1) + 1
    return [load_partition_view(parts_dir, t, ownership, cache_budget) for t in range(m)]


def merge_views(views: list[PartitionView]) -> Adjacency:
    merged: dict[int, tuple[int, ...]] = {}
    for pv in views:
        merged.update(pv.local_adj)
    return dict(sorted(merged.items()))
