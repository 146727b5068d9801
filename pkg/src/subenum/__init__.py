"""Distributed subgraph enumeration over a partitioned data graph."""

from .graph import PartitionView, build_views
from .pattern import QueryPattern, named_pattern, parse_pattern
from .planner import ExecutionPlan, select_plan
from .sme import oracle_enumerate
from .worker import WorkerConfig, run_cluster_loopback

__all__ = [
    "ExecutionPlan",
    "PartitionView",
    "QueryPattern",
    "WorkerConfig",
    "build_views",
    "named_pattern",
    "oracle_enumerate",
    "parse_pattern",
    "run_cluster_loopback",
    "select_plan",
]
