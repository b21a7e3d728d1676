"""Equi-depth partition planning over mirrored replicas.

Boundaries come from the declared column's value distribution in the
dataset's sampled mini replica, with the query's own single-table
constraints imposed; partition predicates are half-open ranges whose
union covers the whole domain, NULLs landing in the first partition.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from ..schema.model import Dataset
from ..schema.resolve import ColumnBinding, ResolvedQuery
from ..sql.ast import NodeKind, SyntaxNode
from ..sql.transform import (
    add_where_conjunct,
    column_node,
    comparison,
    conjoin,
    disjoin,
    is_null,
    literal_node,
    remove_clause,
)
from .pushdown import extract_pushdown_predicate, is_true_literal

logger = logging.getLogger(__name__)

# Rows of (column value); the callable applies the given single-table
# predicate at the source and returns non-NULL values only.
SampleFetcher = Callable[[Dataset, str, str, Optional[SyntaxNode]], list]


@dataclass
class PartitionPlan:
    column: ColumnBinding
    boundaries: list
    partition_queries: list[SyntaxNode]
    merge_destination: Optional[tuple[str, str]] = None

    @property
    def partition_count(self) -> int:
        return len(self.partition_queries)


def equi_depth_boundaries(values: Sequence, k: int) -> list:
    """The j/k sample quantiles (j=1..k-1), deduplicated to stay increasing.

    A full sorted pass over the sample; mini tables are small by design, so
    exact sample quantiles beat a binned histogram.
    """
    if k < 1:
        raise ValueError("partition count must be >= 1")
    if k == 1:
        return []
    ordered = sorted(values)
    n = len(ordered)
    if n == 0:
        return []
    boundaries = []
    for j in range(1, k):
        idx = max(0, math.ceil(n * j / k) - 1)
        boundaries.append(ordered[idx])
    out = []
    for b in boundaries:
        if not out or b > out[-1]:
            out.append(b)
    return out


def compute_partition_boundaries(
    mini: Dataset,
    rq: ResolvedQuery,
    k: int,
    fetch_values: SampleFetcher,
) -> list:
    """Boundaries for ``rq``'s partition column from the mini replica."""
    if k < 1:
        raise ValueError("partition count must be >= 1")
    binding = rq.partition
    if binding is None:
        raise ValueError("query declares no partitioning column")
    where = rq.root.child(NodeKind.WHERE_CLAUSE)
    constraint = extract_pushdown_predicate(
        where.children[0] if where is not None else None, binding.table)
    predicate = None if is_true_literal(constraint) else constraint

    values = fetch_values(mini, binding.table.table.name, binding.column.name, predicate)
    if not values:
        logger.warning(
            "empty sample for %s.%s; falling back to a single partition",
            binding.table.table.name, binding.column.name)
        return []
    return equi_depth_boundaries(values, k)


def _range_predicate(column: SyntaxNode, boundaries: list, index: int) -> SyntaxNode:
    """Predicate of partition ``index`` (0-based) over k=len(boundaries)+1 ranges."""
    k = len(boundaries) + 1
    parts = []
    if index > 0:
        parts.append(comparison(column.clone(), ">", literal_node(boundaries[index - 1])))
    if index < k - 1:
        parts.append(comparison(column.clone(), "<=", literal_node(boundaries[index])))
    predicate = conjoin(*parts)
    if index == 0:
        # NULL values sort nowhere; they belong to the first partition.
        predicate = disjoin(predicate, is_null(column.clone()))
    return predicate


def build_partition_queries(rq: ResolvedQuery, boundaries: list) -> list[SyntaxNode]:
    """k copies of the query, partition clause removed, range predicates added."""
    if rq.partition is None:
        raise ValueError("query declares no partitioning column")
    if any(b >= boundaries[i + 1] for i, b in enumerate(boundaries[:-1])):
        raise ValueError("partition boundaries must be strictly increasing")

    base = remove_clause(rq.root, NodeKind.PARTITION_BY_CLAUSE)
    if not boundaries:
        return [base]

    qualifier = rq.partition.table.effective_name
    column = column_node(qualifier, rq.partition.column.name)

    queries = []
    for i in range(len(boundaries) + 1):
        queries.append(add_where_conjunct(base, _range_predicate(column, boundaries, i)))
    return queries


def build_partition_plan(
    rq: ResolvedQuery,
    mini: Dataset,
    k: int,
    fetch_values: SampleFetcher,
    merge_destination: Optional[tuple[str, str]] = None,
) -> PartitionPlan:
    boundaries = compute_partition_boundaries(mini, rq, k, fetch_values)
    return PartitionPlan(
        column=rq.partition,
        boundaries=boundaries,
        partition_queries=build_partition_queries(rq, boundaries),
        merge_destination=merge_destination,
    )
