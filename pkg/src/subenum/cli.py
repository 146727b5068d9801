"""Command line: partition, plan, run, oracle, verify.

Exit status: 0 success, 1 mismatch against the oracle, 2 usage or input
error, 3 transport failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import socket
import subprocess
import sys
import tempfile
from pathlib import Path

from . import io as gio
from .errors import ParseError, PatternError, SubenumError, TransportFailure
from .gen import random_graph
from .graph import build_views
from .grouping import GroupTable
from .pattern import STANDARD_PATTERNS, QueryPattern, named_pattern, parse_pattern
from .planner import format_plan, select_plan
from .sme import oracle_enumerate
from .transport import Daemon, TcpDaemonServer, TcpTransport, read_hosts
from .worker import Worker, WorkerConfig, run_cluster_loopback

log = logging.getLogger("subenum")

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE, EXIT_TRANSPORT = 0, 1, 2, 3


class UsageError(SubenumError):
    pass


def load_pattern(spec: str) -> QueryPattern:
    """A pattern file path, or one of the built-in names."""
    path = Path(spec)
    if path.is_file():
        return parse_pattern(path.read_text())
    if spec in STANDARD_PATTERNS:
        return named_pattern(spec)
    raise UsageError(f"{spec!r} is neither a pattern file nor one of {sorted(STANDARD_PATTERNS)}")


def _config(args) -> WorkerConfig:
    return WorkerConfig(
        rho=args.rho,
        memory_budget=args.memory_budget,
        cache_budget=args.cache_budget,
        transport=getattr(args, "transport", "loopback"),
        emit=getattr(args, "emit", "count"),
        skip_verify=getattr(args, "skip_verify", False),
    )


def _print_results(results, back: dict[int, int] | None, out=None) -> None:
    out = out or sys.stdout
    for emb in sorted(results):
        ids = emb if back is None else tuple(back[v] for v in emb)
        out.write(" ".join(map(str, ids)) + "\n")


# -- subcommands -------------------------------------------------------------


def cmd_partition(args) -> int:
    graph, dense = gio.renumber(gio.load_graph(args.graph))
    if args.metis:
        ownership = gio.load_metis_partition(args.metis, graph)
    else:
        ownership = gio.hash_partition(graph, args.machines)
    m = max(ownership.values(), default=-1) + 1
    if args.metis and m > args.machines:
        raise UsageError(f"partition file has {m} parts but --machines is {args.machines}")
    paths = gio.write_partition_views(graph, ownership, args.out, dense)
    print(f"wrote {len(paths)} views for {len(graph)} vertices to {args.out}")
    return EXIT_OK


def cmd_plan(args) -> int:
    p = load_pattern(args.pattern)
    plan = select_plan(p, args.rho, root=args.root)
    print(format_plan(plan, p))
    print(f"units: {len(plan.units)}")
    return EXIT_OK


def _run_loopback(args, p, cfg) -> int:
    views = gio.load_partition_views(args.parts, cfg.cache_budget)
    if args.workers is not None and args.workers != len(views):
        raise UsageError(f"--workers {args.workers} but {args.parts} holds {len(views)} views")
    res = run_cluster_loopback(views, p, cfg)
    renum = gio.load_renumbering(args.parts)
    back = {d: o for o, d in renum.items()} if renum else None
    if cfg.emit == "results":
        _print_results(res.results, back)
    for w in res.workers:
        log.info("machine %d: %d embeddings", w.machine_id, w.count)
    if args.json:
        print(json.dumps(res.summary()))
    elif cfg.emit == "count":
        print(res.count)
    return EXIT_OK


def _run_tcp_worker(args, p, cfg) -> int:
    hosts = read_hosts(Path(args.hosts).read_text())
    t = args.worker_id
    if t not in hosts:
        raise UsageError(f"worker {t} missing from {args.hosts}")
    pv = gio.load_partition_view(args.parts, t, cache_budget=cfg.cache_budget)
    table = GroupTable()
    server = TcpDaemonServer(Daemon(pv, table), *hosts[t]).start()
    transport = TcpTransport(t, hosts, connect_timeout=args.connect_timeout)
    try:
        worker = Worker(pv, p, cfg, transport, table)
        worker.prepare()
        worker.run()
        summary = worker.summary()
        if cfg.emit == "results":
            summary["results"] = [list(e) for e in worker.results]
        sys.stdout.write(json.dumps(summary) + "\n")
        sys.stdout.flush()
        # peers may still need our daemon; hold until the launcher says so
        for line in sys.stdin:
            if line.strip() == "shutdown":
                break
    finally:
        transport.close()
        server.stop()
    return EXIT_OK


def _free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def _run_tcp_launcher(args, p, cfg) -> int:
    ownership = gio.load_ownership(args.parts)
    m = max(ownership.values(), default=-1) + 1
    if args.workers is not None and args.workers != m:
        raise UsageError(f"--workers {args.workers} but {args.parts} holds {m} views")
    tmp = None
    hosts_path = args.hosts
    if hosts_path is None:
        tmp = tempfile.NamedTemporaryFile("w", suffix=".hosts", delete=False)
        tmp.write("".join(f"{t} 127.0.0.1:{_free_port()}\n" for t in range(m)))
        tmp.close()
        hosts_path = tmp.name
    base = [sys.executable, "-m", "subenum", "run", "--pattern", args.pattern, "--parts", str(args.parts),
            "--transport", "tcp", "--hosts", hosts_path, "--rho", repr(args.rho),
            "--memory-budget", str(args.memory_budget), "--cache-budget", str(args.cache_budget),
            "--emit", args.emit, "--connect-timeout", repr(args.connect_timeout)]
    env = dict(os.environ)
    src = str(Path(__file__).resolve().parent.parent)
    env["PYTHONPATH"] = src + os.pathsep + env.get("PYTHONPATH", "")
    procs = [subprocess.Popen(base + ["--worker-id", str(t)], stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                              text=True, env=env) for t in range(m)]
    summaries = []
    try:
        for t, proc in enumerate(procs):
            line = proc.stdout.readline()
            if not line:
                raise TransportFailure(f"worker {t} exited with status {proc.wait()} before reporting")
            summaries.append(json.loads(line))
    finally:
        for proc in procs:
            try:
                proc.stdin.write("shutdown\n")
                proc.stdin.close()
            except OSError:
                pass
        codes = [proc.wait() for proc in procs]
        if tmp is not None:
            os.unlink(tmp.name)
    if any(codes):
        raise TransportFailure(f"worker exit codes {codes}")
    total = sum(s["count"] for s in summaries)
    if cfg.emit == "results":
        renum = gio.load_renumbering(args.parts)
        back = {d: o for o, d in renum.items()} if renum else None
        _print_results([tuple(e) for s in summaries for e in s.pop("results")], back)
    if args.json:
        print(json.dumps({
            "count": total,
            "per_worker": [s["count"] for s in summaries],
            "peak_trie_nodes": max(s["peak_trie_nodes"] for s in summaries),
            "workers": summaries,
        }))
    elif cfg.emit == "count":
        print(total)
    return EXIT_OK


def cmd_run(args) -> int:
    p = load_pattern(args.pattern)
    cfg = _config(args)
    if cfg.transport == "loopback":
        return _run_loopback(args, p, cfg)
    if args.worker_id is not None:
        if args.hosts is None:
            raise UsageError("--worker-id needs --hosts")
        return _run_tcp_worker(args, p, cfg)
    return _run_tcp_launcher(args, p, cfg)


def cmd_oracle(args) -> int:
    p = load_pattern(args.pattern)
    found = oracle_enumerate(gio.load_graph(args.graph), p)
    if args.emit == "results":
        _print_results(found, None)
    else:
        print(len(found))
    return EXIT_OK


def cmd_verify(args) -> int:
    p = load_pattern(args.pattern)
    if args.graph:
        graph, _ = gio.renumber(gio.load_graph(args.graph))
    else:
        graph = random_graph(args.n, args.degree, args.seed)
    views = build_views(graph, gio.hash_partition(graph, args.machines), args.machines)
    cfg = _config(args)
    cfg.emit = "results"
    res = run_cluster_loopback(views, p, cfg)
    expected = oracle_enumerate(graph, p)
    got = res.results
    ok = len(got) == len(set(got)) and set(got) == expected
    print(f"distributed={res.count} oracle={len(expected)} {'OK' if ok else 'MISMATCH'}")
    return EXIT_OK if ok else EXIT_MISMATCH


# -- parser ------------------------------------------------------------------


def _budget_flags(sp) -> None:
    sp.add_argument("--rho", type=float, default=1.0, help="round discount exponent for plan scoring")
    sp.add_argument("--memory-budget", type=int, default=0, help="bytes per region group (0 = one group)")
    sp.add_argument("--cache-budget", type=int, default=0, help="foreign cache bytes (0 = unbounded)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="subenum", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("partition", help="split a graph file into per-machine views")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--machines", type=int, default=1)
    sp.add_argument("--metis", help="METIS part file (one part id per line)")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_partition)

    sp = sub.add_parser("plan", help="print the execution plan for a pattern")
    sp.add_argument("--pattern", required=True)
    sp.add_argument("--rho", type=float, default=1.0)
    sp.add_argument("--root", type=int, help="pin the first pivot to this pattern vertex")
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("run", help="enumerate over partition views")
    sp.add_argument("--pattern", required=True)
    sp.add_argument("--parts", required=True)
    sp.add_argument("--workers", type=int)
    sp.add_argument("--transport", choices=("loopback", "tcp"), default="loopback")
    sp.add_argument("--hosts", help="'machine_id host:port' per line (tcp)")
    sp.add_argument("--worker-id", type=int, help="run only this worker (tcp)")
    sp.add_argument("--emit", choices=("count", "results"), default="count")
    sp.add_argument("--json", action="store_true", help="print a JSON summary")
    sp.add_argument("--connect-timeout", type=float, default=10.0, help="seconds to keep retrying a peer (tcp)")
    _budget_flags(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("oracle", help="brute-force enumeration on a whole graph")
    sp.add_argument("--pattern", required=True)
    sp.add_argument("--graph", required=True)
    sp.add_argument("--emit", choices=("count", "results"), default="count")
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("verify", help="compare a loopback run with the oracle")
    sp.add_argument("--pattern", required=True)
    sp.add_argument("--graph", help="graph file; a seeded random graph otherwise")
    sp.add_argument("--machines", type=int, default=2)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--n", type=int, default=60)
    sp.add_argument("--degree", type=float, default=5.0)
    sp.add_argument("--skip-verify", action="store_true", help=argparse.SUPPRESS)
    _budget_flags(sp)
    sp.set_defaults(func=cmd_verify)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except TransportFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (ParseError, PatternError, UsageError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
