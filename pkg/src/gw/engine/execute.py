"""End-to-end plan execution over the simulated cluster.

Distributed joins follow the fetch/cache/rewrite/join/store sequence;
partitioned queries run one branch per mirror and merge the partials into
the MyDB destination, where the ORDER BY (if any) is finally applied.
"""

from __future__ import annotations

import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

from ..planner.distributed import (
    ClusterView,
    DistributedPlan,
    build_distributed_plan,
    plan_destination,
)
from ..planner.partition import PartitionPlan
from ..schema.catalog import Catalog
from ..schema.model import Dataset, DatasetKind, TableSchema
from ..schema.resolve import ResolvedQuery, resolve
from ..sql.ast import NodeKind, SyntaxNode, find_nodes, name_leaf, trees_equal
from ..sql.transform import remove_clause, substitute_table_refs
from .analyze import result_schema
from .backend import NodeBackend, RowBatch, qualify_table_refs
from .bulkcopy import OperationCancelled, TableSource, bulk_copy
from .cache import CachedTable, TableCache, cache_key
from .sources import DialectTextSource, LocalTableSource

DEFAULT_MYDB_ROW_QUOTA = 1_000_000


class StaleCatalogError(Exception):
    pass


class QuotaExceededError(Exception):
    pass


class ExecutionError(Exception):
    pass


@dataclass
class FetchEvent:
    destination: str
    source: str
    started: float
    finished: float
    rows: int
    cache_hit: bool = False


class ExecEnv:
    """Execution-side wiring: backends, remote adapters, quotas, caches."""

    def __init__(
        self,
        catalog: Catalog,
        backends: dict[str, NodeBackend],
        view: ClusterView,
        mydb_row_quota: int = DEFAULT_MYDB_ROW_QUOTA,
        reuse_cache: bool = False,
        cache_budget_bytes: int = 64 * 1024 * 1024,
    ):
        self.catalog = catalog
        self.backends = backends
        self.view = view
        self.mydb_row_quota = mydb_row_quota
        self.reuse_cache = reuse_cache
        self._remotes: dict[str, tuple[NodeBackend, str]] = {}
        self._caches: dict[str, TableCache] = {}
        self._cache_budget = cache_budget_bytes

    def backend(self, node_id: str) -> NodeBackend:
        try:
            return self.backends[node_id]
        except KeyError:
            raise ExecutionError(f"unknown node {node_id!r}") from None

    def register_remote(self, dataset_name: str, backend: NodeBackend, database: str) -> None:
        self._remotes[dataset_name.lower()] = (backend, database)

    def cache_for(self, node_id: str) -> TableCache:
        if node_id not in self._caches:
            self._caches[node_id] = TableCache(self._cache_budget)
        return self._caches[node_id]

    def source_for(self, dataset: Dataset, table: TableSchema) -> TableSource:
        if dataset.kind is DatasetKind.REMOTE:
            entry = self._remotes.get(dataset.name.lower())
            if entry is None:
                raise ExecutionError(f"no adapter registered for remote dataset {dataset.name!r}")
            backend, database = entry
            return DialectTextSource(backend, database, table, dataset.dialect_name)
        nodes = self.view.hosts(dataset.name)
        if not nodes:
            raise ExecutionError(f"dataset {dataset.name!r} is hosted nowhere")
        backend = self.backend(sorted(nodes)[0])
        return LocalTableSource(backend, dataset.name, table)

    def dataset_node(self, dataset: Dataset) -> str:
        nodes = self.view.hosts(dataset.name)
        if not nodes:
            raise ExecutionError(f"dataset {dataset.name!r} is hosted nowhere")
        return sorted(nodes)[0]


@dataclass
class ExecContext:
    env: ExecEnv
    job_id: str = "adhoc"
    user: Optional[str] = None
    cancel: threading.Event = field(default_factory=threading.Event)
    batch_size: int = 4096
    fetch_events: list[FetchEvent] = field(default_factory=list)
    source_wrapper: Optional[Callable[[TableSource], TableSource]] = None

    def check_cancel(self):
        if self.cancel.is_set():
            raise OperationCancelled(f"job {self.job_id} cancelled")


def _fetch_phase(plan: DistributedPlan, ctx: ExecContext, target: NodeBackend,
                 remap: dict) -> None:
    """Copy every remote table into the target's tempdb, in parallel.

    ``remap`` collects substitutions from plan temp names to reused cache
    tables; it is the caller's dict so cleanup sees partial progress too.
    """
    target.ensure_database("tempdb")
    if not plan.fetch_specs:
        return

    cache = ctx.env.cache_for(target.node_id) if ctx.env.reuse_cache else None

    def fetch_one(spec):
        ctx.check_cancel()
        binding = plan.fetch_bindings[spec.destination]
        source_version = plan.dataset_versions.get(
            binding.dataset.name, plan.catalog_version)
        key = cache_key(spec.cache_key(), source_version)

        if cache is not None:
            hit = cache.lookup(key)
            if hit is not None:
                ctx.fetch_events.append(FetchEvent(
                    destination=hit.table_name,
                    source=f"{spec.source_dataset}:{spec.source_table}",
                    started=time.monotonic(), finished=time.monotonic(),
                    rows=hit.rows, cache_hit=True))
                remap[("tempdb", spec.destination)] = ("tempdb", hit.table_name)
                return

        table_name = f"gw_cache_{key}" if cache is not None else spec.destination
        source = ctx.env.source_for(binding.dataset, binding.table)
        if ctx.source_wrapper is not None:
            source = ctx.source_wrapper(source)
        schema, batches = source.open(list(spec.columns), spec.predicate, ctx.batch_size)
        temp_schema = TableSchema(table_name, schema.columns)
        target.drop_table("tempdb", table_name)
        target.create_table("tempdb", temp_schema)
        started = time.monotonic()
        rows = bulk_copy(batches, target, "tempdb", temp_schema, cancel=ctx.cancel)
        finished = time.monotonic()
        target.create_index("tempdb", table_name, list(spec.index_columns))
        ctx.fetch_events.append(FetchEvent(
            destination=table_name,
            source=f"{spec.source_dataset}:{spec.source_table}",
            started=started, finished=finished, rows=rows))
        if cache is not None:
            approx = rows * max(1, len(spec.columns)) * 16
            for evicted in cache.store(CachedTable(key, table_name, rows, approx)):
                target.drop_table("tempdb", evicted.table_name)
            remap[("tempdb", spec.destination)] = ("tempdb", table_name)

    # remote tables fetch in parallel; each worker owns its own pipeline
    with ThreadPoolExecutor(max_workers=max(2, len(plan.fetch_specs))) as pool:
        futures = [pool.submit(fetch_one, s) for s in plan.fetch_specs]
        for f in futures:
            f.result()


def _temp_tables_used(plan: DistributedPlan,
                      remap: dict) -> list[str]:
    used = []
    for spec in plan.fetch_specs:
        mapped = remap.get(("tempdb", spec.destination))
        used.append(mapped[1] if mapped else spec.destination)
    return used


def _materialize(
    statement: SyntaxNode,
    dest_backend: NodeBackend,
    dest_database: str,
    dest_table: str,
    run_backend: NodeBackend,
    run_database: str,
    ctx: ExecContext,
    quota_rows: Optional[int] = None,
    quota_already_used: int = 0,
    schema: Optional[TableSchema] = None,
    if_exists: str = "error",
) -> int:
    """Run the statement and stream its rows into a fresh destination table."""
    if schema is None:
        schema = result_schema(statement, dest_table)
    else:
        schema = TableSchema(dest_table, schema.columns)
    dest_backend.ensure_database(dest_database)
    existing = {t.name.lower() for t in dest_backend.introspect_database(dest_database)}
    if dest_table.lower() in existing:
        if if_exists == "error":
            raise ExecutionError(
                f"destination table {dest_table!r} already exists in {dest_database!r}")
        dest_backend.drop_table(dest_database, dest_table)
    dest_backend.create_table(dest_database, schema)

    executable = qualify_table_refs(statement)
    total = 0
    try:
        _, batches = run_backend.run_statement(
            run_database, executable, expected_schema=schema.columns,
            batch_size=ctx.batch_size)
        conn = dest_backend.connect(dest_database)
        try:
            for batch in batches:
                ctx.check_cancel()
                total += len(batch)
                if quota_rows is not None and quota_already_used + total > quota_rows:
                    raise QuotaExceededError(
                        f"MyDB row quota of {quota_rows} exceeded")
                dest_backend.insert_rows(dest_database, schema, batch.rows, conn=conn)
            conn.commit()
        finally:
            conn.close()
    except BaseException:
        dest_backend.drop_table(dest_database, dest_table)
        raise
    return total


def _mydb_used_rows(backend: NodeBackend, database: str) -> int:
    total = 0
    for table in backend.introspect_database(database):
        total += backend.table_row_count(database, table.name)
    return total


def _check_fresh(dataset_versions: dict, catalog) -> None:
    for name, version in dataset_versions.items():
        current = catalog.dataset_version(name)
        if current != version:
            raise StaleCatalogError(
                f"dataset {name!r} changed (v{version} -> v{current}) "
                "since the query was resolved")


def execute_distributed(plan: DistributedPlan, ctx: ExecContext,
                        if_exists: str = "error") -> tuple[str, str, int]:
    """Run a distributed plan; returns (mydb dataset, table, row count)."""
    _check_fresh(plan.dataset_versions, ctx.env.catalog)

    target = ctx.env.backend(plan.target_node)
    remap: dict = {}
    try:
        _fetch_phase(plan, ctx, target, remap)
        statement = plan.rewritten_query
        if remap:
            statement = substitute_table_refs(statement, remap)

        mydb_name, dest_table = plan.destination
        mydb = ctx.env.catalog.dataset(mydb_name)
        mydb_backend = ctx.env.backend(ctx.env.dataset_node(mydb))
        mydb_backend.ensure_database(mydb_name)

        used = _mydb_used_rows(mydb_backend, mydb_name)
        rows = _materialize(
            statement, mydb_backend, mydb_name, dest_table,
            run_backend=target, run_database="tempdb", ctx=ctx,
            quota_rows=ctx.env.mydb_row_quota, quota_already_used=used,
            if_exists=if_exists)
    finally:
        _cleanup_temps(plan, remap, target, ctx)

    ctx.env.catalog.invalidate(mydb_name)
    return mydb_name, dest_table, rows


def _cleanup_temps(plan: DistributedPlan, remap: dict, target: NodeBackend,
                   ctx: ExecContext) -> None:
    keep_cached = ctx.env.reuse_cache
    for spec in plan.fetch_specs:
        mapped = remap.get(("tempdb", spec.destination))
        name = mapped[1] if mapped else spec.destination
        if keep_cached and name.startswith("gw_cache_"):
            continue
        target.drop_table("tempdb", name)


def _merge_order_clause(statement: SyntaxNode, schema: TableSchema) -> Optional[SyntaxNode]:
    """ORDER BY of the merge step, rewritten over the output columns."""
    order = statement.child(NodeKind.ORDER_BY_CLAUSE)
    if order is None:
        return None
    select_list = statement.child(NodeKind.SELECT_LIST)
    out_items = []
    for item in order.children:
        expr = item.children[0]
        direction = item.children[1] if len(item.children) > 1 else None
        matched = None
        for idx, sel in enumerate(select_list.children):
            head = sel.children[0]
            alias = sel.children[1].leaf_value() if len(sel.children) > 1 else None
            if head.kind == NodeKind.STAR:
                continue
            if trees_equal(expr, head):
                matched = schema.columns[idx].name if idx < len(schema.columns) else None
            elif (alias is not None and expr.kind == NodeKind.COLUMN_REF
                  and len(expr.children) == 1
                  and expr.children[0].leaf_value().lower() == alias.lower()):
                matched = schema.columns[idx].name
            if matched:
                break
        if matched is None and expr.kind == NodeKind.COLUMN_REF:
            # a bare output column that also exists in the destination schema
            name = expr.children[-1].leaf_value()
            if schema.column(name) is not None:
                matched = schema.column(name).name
        if matched is None:
            raise ExecutionError(
                "partitioned queries can only ORDER BY columns present in the "
                "select list")
        col = SyntaxNode(NodeKind.COLUMN_REF, [name_leaf(matched)])
        children = [col] + ([direction.clone()] if direction is not None else [])
        out_items.append(SyntaxNode(NodeKind.ORDER_ITEM, children))
    return SyntaxNode(NodeKind.ORDER_BY_CLAUSE, out_items)


def execute_partition_branch(
    branch_rq: ResolvedQuery,
    node_id: str,
    partial_table: str,
    ctx: ExecContext,
) -> tuple[str, int]:
    """One partition branch: run the branch query on its node, store the
    partial result in that node's tempdb.  Returns (node, rows)."""
    plan = build_distributed_plan(
        branch_rq, ctx.env.view, job_tag=partial_table,
        target_node=node_id, destination_override=("tempdb", partial_table))
    target = ctx.env.backend(node_id)
    remap: dict = {}
    try:
        _fetch_phase(plan, ctx, target, remap)
        statement = remove_clause(plan.rewritten_query, NodeKind.ORDER_BY_CLAUSE)
        if remap:
            statement = substitute_table_refs(statement, remap)
        target.drop_table("tempdb", partial_table)
        _materialize(statement, target, "tempdb", partial_table,
                     run_backend=target, run_database="tempdb", ctx=ctx)
    finally:
        _cleanup_temps(plan, remap, target, ctx)
    rows = target.table_row_count("tempdb", partial_table)
    return node_id, rows


def execute_partitioned(
    rq: ResolvedQuery,
    plan: PartitionPlan,
    assignments: list[str],
    ctx: ExecContext,
    destination_table: Optional[str] = None,
) -> tuple[str, str, int]:
    """Run all partition branches and merge the partials into MyDB."""
    _check_fresh(rq.dataset_versions, ctx.env.catalog)
    queries = plan.partition_queries
    if len(assignments) != len(queries):
        raise ExecutionError("one node assignment is required per partition")

    destination = plan.merge_destination or plan_destination(
        rq, ctx.env.view, default_table=destination_table)
    mydb_name, dest_table = destination
    mydb = ctx.env.catalog.dataset(mydb_name)
    mydb_backend = ctx.env.backend(ctx.env.dataset_node(mydb))
    mydb_backend.ensure_database(mydb_name)

    branch_rqs = [
        resolve(q, ctx.env.catalog, rq.default_dataset, user=rq.user)
        for q in queries
    ]
    partials: list[tuple[str, str]] = []  # (node, table)
    staging = f"gw_{ctx.job_id}_merge"

    try:
        def run_branch(i: int):
            name = f"gw_{ctx.job_id}_p{i}"
            node, _ = execute_partition_branch(branch_rqs[i], assignments[i], name, ctx)
            return (node, name)

        with ThreadPoolExecutor(max_workers=max(2, len(queries))) as pool:
            futures = [pool.submit(run_branch, i) for i in range(len(queries))]
            for f in futures:
                partials.append(f.result())

        rows = merge_partials(rq.root, branch_rqs[0].root, partials,
                              (mydb_name, dest_table), ctx)
    finally:
        for node, table in partials:
            ctx.env.backend(node).drop_table("tempdb", table)
    return mydb_name, dest_table, rows


def merge_partials(
    original_root: SyntaxNode,
    branch_root: SyntaxNode,
    partials: list[tuple[str, str]],
    destination: tuple[str, str],
    ctx: ExecContext,
    if_exists: str = "error",
) -> int:
    """Append every partial into a staging table co-located with the MyDB,
    then apply the original ORDER BY while writing the destination."""
    mydb_name, dest_table = destination
    mydb = ctx.env.catalog.dataset(mydb_name)
    mydb_backend = ctx.env.backend(ctx.env.dataset_node(mydb))
    mydb_backend.ensure_database(mydb_name)
    staging = f"gw_{ctx.job_id}_merge"

    schema = result_schema(
        remove_clause(branch_root, NodeKind.ORDER_BY_CLAUSE), staging)
    mydb_backend.ensure_database("tempdb")
    mydb_backend.drop_table("tempdb", staging)
    mydb_backend.create_table("tempdb", schema)
    try:
        for node, table in partials:
            source_backend = ctx.env.backend(node)
            _, batches = source_backend.run_sql_text(
                "tempdb", f"SELECT * FROM {source_backend._quote(table)}",
                batch_size=ctx.batch_size, expected_schema=schema.columns)
            bulk_copy(batches, mydb_backend, "tempdb", schema, cancel=ctx.cancel)

        dest_schema = result_schema(branch_root, dest_table)
        order = _merge_order_clause(original_root, dest_schema)
        merge_stmt = _staging_select(staging, dest_schema, order)
        used = _mydb_used_rows(mydb_backend, mydb_name)
        rows = _materialize(
            merge_stmt, mydb_backend, mydb_name, dest_table,
            run_backend=mydb_backend, run_database="tempdb", ctx=ctx,
            quota_rows=ctx.env.mydb_row_quota, quota_already_used=used,
            schema=dest_schema, if_exists=if_exists)
    finally:
        mydb_backend.drop_table("tempdb", staging)
    ctx.env.catalog.invalidate(mydb_name)
    return rows


def _staging_select(staging: str, schema: TableSchema,
                    order: Optional[SyntaxNode]) -> SyntaxNode:
    items = [
        SyntaxNode(NodeKind.SELECT_ITEM,
                   [SyntaxNode(NodeKind.COLUMN_REF, [name_leaf(c.name)])])
        for c in schema.columns
    ]
    source = SyntaxNode(NodeKind.TABLE_SOURCE,
                        [SyntaxNode(NodeKind.TABLE_REF, [name_leaf(staging)])])
    children = [
        SyntaxNode(NodeKind.SELECT_LIST, items),
        SyntaxNode(NodeKind.FROM_CLAUSE, [source]),
    ]
    if order is not None:
        children.append(order)
    return SyntaxNode(NodeKind.SELECT_STATEMENT, children)
