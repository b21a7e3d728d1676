"""Query planning: pushdown extraction, distributed plans, partition plans."""

from .distributed import (
    ClusterView,
    DistributedPlan,
    PlanningError,
    RemoteFetchSpec,
    build_distributed_plan,
    plan_destination,
    select_target_node,
)
from .partition import (
    PartitionPlan,
    build_partition_plan,
    build_partition_queries,
    compute_partition_boundaries,
    equi_depth_boundaries,
)
from .pushdown import extract_pushdown_predicate, is_true_literal, true_literal

__all__ = [
    "ClusterView", "DistributedPlan", "PlanningError", "RemoteFetchSpec",
    "build_distributed_plan", "plan_destination", "select_target_node",
    "PartitionPlan", "build_partition_plan", "build_partition_queries",
    "compute_partition_boundaries", "equi_depth_boundaries",
    "extract_pushdown_predicate", "is_true_literal", "true_literal",
]
