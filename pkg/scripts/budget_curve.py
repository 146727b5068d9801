"""Memory budget vs region groups, peak trie size and message count."""

import argparse

from subenum.gen import random_graph
from subenum.graph import build_views
from subenum.io import hash_partition
from subenum.pattern import named_pattern
from subenum.planner import select_plan
from subenum.worker import WorkerConfig, run_cluster_loopback


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--pattern", default="pstar")
    ap.add_argument("--n", type=int, default=120)
    ap.add_argument("--degree", type=float, default=6.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--machines", type=int, default=2)
    ap.add_argument("--budgets", type=int, nargs="+", default=[0, 20000, 5000, 1000, 1])
    args = ap.parse_args()

    g = random_graph(args.n, args.degree, args.seed)
    p = named_pattern(args.pattern)
    plan = select_plan(p)
    print(f"{'budget':>8} {'groups':>7} {'peak':>8} {'messages':>9} {'count':>9} {'sec':>6}")
    for budget in args.budgets:
        views = build_views(g, hash_partition(g, args.machines), args.machines)
        res = run_cluster_loopback(views, p, WorkerConfig(memory_budget=budget), plan=plan)
        print(f"{budget:>8} {res.groups_created:>7} {res.peak_trie_nodes:>8} "
              f"{res.enumeration_messages():>9} {res.count:>9} {res.elapsed:>6.2f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
