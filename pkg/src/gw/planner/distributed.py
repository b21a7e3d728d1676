"""Distributed-join planning: pick the target node, prune and push down
remote fetches, rewrite the query against locally cached copies."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Protocol

from ..schema.model import Dataset, DatasetKind
from ..schema.resolve import ColumnBinding, ResolvedQuery, TableBinding, required_columns
from ..sql import render
from ..sql.ast import NodeKind, SyntaxNode, find_nodes, table_ref_parts
from ..sql.dialect import BASE
from ..sql.transform import remove_clause, substitute_table_refs
from .pushdown import extract_pushdown_predicate, is_true_literal

# Dataset kinds that make their hosting node a candidate for the final join.
_HOSTABLE = (DatasetKind.LOCAL, DatasetKind.MYDB)


class PlanningError(Exception):
    pass


class ClusterView(Protocol):
    """What the planner needs to know about the cluster."""

    def hosts(self, dataset_name: str) -> list[str]:
        """Node ids holding a full copy of the dataset (empty for remotes)."""
        ...

    def row_count(self, node_id: str, dataset_name: str, table_name: str) -> int:
        """Registry row-count statistic; 0 when unknown."""
        ...

    def mydb_dataset(self, user: str) -> Dataset:
        ...


@dataclass(frozen=True)
class RemoteFetchSpec:
    source_dataset: str
    source_table: str
    columns: tuple[str, ...]
    predicate: Optional[SyntaxNode]  # None renders as no WHERE (TRUE)
    destination: str  # tempdb table name on the target node
    index_columns: tuple[str, ...]

    def cache_key(self) -> tuple:
        pred = render(self.predicate, BASE) if self.predicate is not None else ""
        return (self.source_dataset.lower(), self.source_table.lower(),
                tuple(c.lower() for c in self.columns), pred)


@dataclass
class DistributedPlan:
    target_node: str
    fetch_specs: list[RemoteFetchSpec]
    rewritten_query: SyntaxNode
    destination: tuple[str, str]  # (mydb dataset name, table name)
    catalog_version: int
    fetch_bindings: dict[str, TableBinding] = field(default_factory=dict)
    dataset_versions: dict[str, int] = field(default_factory=dict)


def select_target_node(rq: ResolvedQuery, view: ClusterView) -> str:
    """The node holding the most referenced data, by registry row counts."""
    weights: dict[str, int] = {}
    for binding in rq.tables:
        if binding.dataset.kind not in _HOSTABLE:
            continue
        for node in view.hosts(binding.dataset.name):
            count = view.row_count(node, binding.dataset.name, binding.table.name)
            weights[node] = weights.get(node, 0) + count
    if not weights:
        raise PlanningError(
            "no cluster node hosts any referenced dataset; "
            "designate a default node or register a local copy")
    # deterministic tie-break: ascending node id among maximal weights
    top = max(weights.values())
    return min(node for node, w in weights.items() if w == top)


def _where_expr(rq: ResolvedQuery) -> Optional[SyntaxNode]:
    clause = rq.root.child(NodeKind.WHERE_CLAUSE)
    return clause.children[0] if clause is not None else None


def _is_local(binding: TableBinding, target: str, view: ClusterView) -> bool:
    if binding.dataset.kind not in _HOSTABLE:
        return False
    return target in view.hosts(binding.dataset.name)


def _on_condition_columns(rq: ResolvedQuery, binding: TableBinding) -> set[str]:
    cols: set[str] = set()
    from_clause = rq.root.child(NodeKind.FROM_CLAUSE)
    for join in from_clause.children[1:]:
        if len(join.children) < 2:
            continue  # CROSS JOIN carries no ON
        for ref in find_nodes(join.children[1], NodeKind.COLUMN_REF):
            cb: ColumnBinding = ref.annotations["binding"]
            if cb.table is binding:
                cols.add(cb.column.name)
    return cols


def plan_destination(rq: ResolvedQuery, view: ClusterView,
                     default_table: Optional[str] = None) -> tuple[str, str]:
    """(mydb dataset, table) the results go to: INTO target or a default name."""
    if rq.user is None:
        raise PlanningError("query planning requires a user context for the MyDB destination")
    mydb = view.mydb_dataset(rq.user)
    into = rq.root.child(NodeKind.INTO_CLAUSE)
    if into is not None:
        dataset_name, table_name = table_ref_parts(into.children[0])
        if dataset_name is not None and dataset_name.lower() not in ("mydb", mydb.name.lower()):
            raise PlanningError(
                f"INTO may only target the user's MyDB, not {dataset_name!r}")
        return (mydb.name, table_name)
    if default_table is None:
        raise PlanningError("query has no INTO clause and no default destination was given")
    return (mydb.name, default_table)


def build_distributed_plan(
    rq: ResolvedQuery,
    view: ClusterView,
    job_tag: str = "adhoc",
    destination_table: Optional[str] = None,
    target_node: Optional[str] = None,
    destination_override: Optional[tuple[str, str]] = None,
) -> DistributedPlan:
    """Fetch specs for every non-co-located table, plus a rewritten query
    that joins local tables with the cached copies."""
    target = target_node if target_node is not None else select_target_node(rq, view)
    where = _where_expr(rq)
    if destination_override is not None:
        destination = destination_override
    else:
        destination = plan_destination(rq, view, default_table=destination_table)

    # One fetch per distinct remote table: aliases of a self-join share the
    # cached copy, so their column needs union and their pushdowns OR together.
    groups: dict[tuple[str, str], list[TableBinding]] = {}
    for binding in rq.tables:
        if _is_local(binding, target, view):
            continue
        key = (binding.dataset.name.lower(), binding.table.name.lower())
        groups.setdefault(key, []).append(binding)

    specs: list[RemoteFetchSpec] = []
    mapping: dict[tuple[str, str], tuple[Optional[str], str]] = {}
    fetch_bindings: dict[str, TableBinding] = {}

    for bindings in groups.values():
        first = bindings[0]
        needed: set[str] = set()
        index_cols: set[str] = set()
        per_alias_preds: list[SyntaxNode] = []
        all_true = False
        for binding in bindings:
            needed |= required_columns(rq, binding)
            index_cols |= _on_condition_columns(rq, binding)
            predicate = extract_pushdown_predicate(where, binding)
            if is_true_literal(predicate):
                all_true = True
            else:
                per_alias_preds.append(predicate)

        pred: Optional[SyntaxNode] = None
        if per_alias_preds and not all_true:
            pred = per_alias_preds[0] if len(per_alias_preds) == 1 else SyntaxNode(
                NodeKind.OR_EXPR, per_alias_preds)
            for ref in find_nodes(pred, NodeKind.COLUMN_REF):
                index_cols.add(ref.annotations["binding"].column.name)

        columns = tuple(c for c in first.table.column_names() if c in needed)
        spec = RemoteFetchSpec(
            source_dataset=first.dataset.name,
            source_table=first.table.name,
            columns=columns,
            predicate=pred,
            destination=f"gw_{job_tag}_{len(specs)}",
            index_columns=tuple(c for c in columns if c in index_cols),
        )
        specs.append(spec)
        fetch_bindings[spec.destination] = first
        mapping[(first.dataset.name, first.table.name)] = ("tempdb", spec.destination)

    rewritten = substitute_table_refs(
        rq.root, mapping,
        default_dataset=rq.default_dataset.name if rq.default_dataset else None)
    rewritten = remove_clause(rewritten, NodeKind.INTO_CLAUSE)
    rewritten = remove_clause(rewritten, NodeKind.PARTITION_BY_CLAUSE)

    return DistributedPlan(
        target_node=target,
        fetch_specs=specs,
        rewritten_query=rewritten,
        destination=destination,
        catalog_version=rq.catalog_version,
        fetch_bindings=fetch_bindings,
        dataset_versions=dict(rq.dataset_versions),
    )
