"""Built-in job definitions: query execution, table import and export.

Builders are precompiled; only parameters vary per instance.  A resumed
job rebuilds the same workflow from the same parameters and continues at
its checkpoint.
"""

from __future__ import annotations

from pathlib import Path

from ..engine.execute import (
    ExecContext,
    QuotaExceededError,
    execute_distributed,
    execute_partition_branch,
    merge_partials,
)
from ..engine.sources import LocalTableSource
from ..planner.distributed import build_distributed_plan, plan_destination
from ..planner.partition import build_partition_plan
from ..schema.resolve import resolve
from ..sql.ast import NodeKind, find_nodes
from ..sql.dialect import BASE, get_dialect
from ..sql.parser import parse
from ..sql.render import render
from .model import (
    Activity,
    ActivityContext,
    ActivityKind,
    Branch,
    ParallelGroup,
    WorkflowGraph,
    register_workflow,
)


def _exec_context(ctx: ActivityContext) -> ExecContext:
    return ExecContext(
        env=ctx.runtime.env,
        job_id=ctx.job.name,
        user=ctx.job.user,
        cancel=ctx.cancel,
    )


def _mini_for(runtime, dataset_name: str):
    """The sampled replica used for value statistics, or the dataset itself."""
    for candidate in runtime.catalog.datasets():
        if candidate.parent and candidate.parent.lower() == dataset_name.lower():
            return candidate
    return runtime.catalog.dataset(dataset_name)


def _sample_fetcher(runtime):
    def fetch(dataset, table, column, predicate):
        backend = runtime.env.backend(runtime.env.dataset_node(dataset))
        schema = next(t for t in backend.introspect_database(dataset.name)
                      if t.name.lower() == table.lower())
        source = LocalTableSource(backend, dataset.name, schema)
        _, batches = source.open([column], predicate, 4096)
        values = []
        for batch in batches:
            values.extend(v for (v,) in batch.rows if v is not None)
        return values
    return fetch


def build_query_workflow(params: dict, runtime) -> WorkflowGraph:
    sql = params["sql"]
    user = params["user"]
    dialect = get_dialect(params.get("dialect", "base"))
    default_dataset = params.get("dataset") or runtime.extras.get("default-dataset")
    tree = parse(sql, dialect)
    partitioned = bool(find_nodes(tree, NodeKind.PARTITION_BY_CLAUSE))

    def check(ctx: ActivityContext):
        rq = resolve(tree, runtime.catalog, default_dataset, user=user)
        destination = plan_destination(rq, runtime.view,
                                       default_table=ctx.job.name)
        mydb_name, dest_table = destination
        mydb = runtime.catalog.dataset(mydb_name)
        backend = runtime.env.backend(runtime.env.dataset_node(mydb))
        if backend.has_database(mydb_name):
            existing = {t.name.lower() for t in backend.introspect_database(mydb_name)}
            if dest_table.lower() in existing:
                raise RuntimeError(
                    f"destination table {dest_table!r} already exists in your MyDB")
        ctx.results["destination"] = f"{mydb_name}:{dest_table}"
        return None

    if not partitioned:
        def execute(ctx: ActivityContext):
            rq = resolve(tree, runtime.catalog, default_dataset, user=user)
            plan = build_distributed_plan(
                rq, runtime.view, job_tag=ctx.job.name,
                destination_table=ctx.job.name)
            mydb, table, rows = execute_distributed(
                plan, _exec_context(ctx), if_exists="replace")
            ctx.results["rows"] = str(rows)
            return f"{mydb}:{table}"

        return WorkflowGraph(steps=[
            Activity("check", run=check),
            Activity("execute", run=execute),
        ])

    # partitioned: boundaries and branch queries are derived deterministically
    # from the parameters, so a resumed job rebuilds the same shape
    k = int(params.get("partitions", "0"))
    rq = resolve(tree, runtime.catalog, default_dataset, user=user)
    first_dataset = rq.partition.table.dataset.name
    if k < 1:
        k = max(1, len(runtime.view.hosts(first_dataset)))
    mini = _mini_for(runtime, first_dataset)
    plan = build_partition_plan(rq, mini, k, _sample_fetcher(runtime))
    branch_sqls = [render(q, BASE) for q in plan.partition_queries]
    retry_limit = int(params.get("retry-limit", "1"))

    def make_branch(i: int, branch_sql: str) -> Branch:
        def run_branch(ctx: ActivityContext):
            branch_rq = resolve(parse(branch_sql, BASE), runtime.catalog,
                                default_dataset, user=user)
            partial = f"gw_{ctx.job.name}_p{i}"
            execute_partition_branch(branch_rq, ctx.node, partial,
                                     _exec_context(ctx))
            return f"{ctx.node}:{partial}"

        return Branch(
            id=f"part{i}",
            activities=[Activity(f"part{i}.run", kind=ActivityKind.PARTITION_BRANCH,
                                 run=run_branch)],
            retry_limit=retry_limit,
            required_datasets=(first_dataset,),
        )

    branches = [make_branch(i, s) for i, s in enumerate(branch_sqls)]

    def merge(ctx: ActivityContext):
        results = ctx.results
        partials = []
        for i in range(len(branch_sqls)):
            located = results.get(f"part{i}.run")
            if located is None:
                raise RuntimeError(f"partition {i} left no partial result")
            node, table = located.split(":", 1)
            partials.append((node, table))
        original_rq = resolve(tree, runtime.catalog, default_dataset, user=user)
        branch_rq = resolve(parse(branch_sqls[0], BASE), runtime.catalog,
                            default_dataset, user=user)
        destination = plan_destination(original_rq, runtime.view,
                                       default_table=ctx.job.name)
        ectx = _exec_context(ctx)
        try:
            rows = merge_partials(original_rq.root, branch_rq.root, partials,
                                  destination, ectx, if_exists="replace")
        finally:
            for node, table in partials:
                runtime.env.backend(node).drop_table("tempdb", table)
        ctx.results["rows"] = str(rows)
        return f"{destination[0]}:{destination[1]}"

    return WorkflowGraph(steps=[
        Activity("check", run=check),
        ParallelGroup("partitions", branches),
        Activity("merge", kind=ActivityKind.MERGE_RESULTS, run=merge),
    ])


def build_import_workflow(params: dict, runtime) -> WorkflowGraph:
    user = params["user"]

    def stage(ctx: ActivityContext):
        mydb = runtime.catalog.mydb_of(user)
        if mydb is None:
            raise RuntimeError(f"user {user!r} has no MyDB")
        node = runtime.env.dataset_node(mydb)
        backend = runtime.env.backend(node)
        db_path = backend._databases[mydb.name.lower()]
        ctx.results["node"] = node
        ctx.results["database"] = mydb.name
        ctx.results["data-dir"] = str(Path(db_path).parent)
        return None

    def do_import(ctx: ActivityContext):
        results = ctx.results
        backend = runtime.env.backend(results["node"])
        database = results["database"]
        existed = {t.name.lower() for t in backend.introspect_database(database)}
        used_before = sum(backend.table_row_count(database, t)
                          for t in existed)
        activity = Activity(
            "import.exec", kind=ActivityKind.IMPORT_FILE, delegate="assigned-node",
            params={
                "data-dir": results["data-dir"],
                "database": database,
                "table": params["table"],
                "format": params.get("format", "csv"),
                "file": params["file"],
                "node": results["node"],
            })
        ctx.node = results["node"]
        try:
            out, _ = _delegate(ctx, runtime, activity)
            imported = int(out.get("rows", "0"))
            if used_before + imported > runtime.env.mydb_row_quota:
                raise QuotaExceededError(
                    f"MyDB row quota of {runtime.env.mydb_row_quota} exceeded")
        except QuotaExceededError:
            # leave no partial table behind when this import created it
            if params["table"].lower() not in existed:
                backend.drop_table(database, params["table"])
            runtime.catalog.invalidate(database)
            raise
        runtime.catalog.invalidate(database)
        ctx.results["rows"] = out.get("rows", "0")
        return out.get("rows", "0")

    return WorkflowGraph(steps=[
        Activity("stage", run=stage),
        Activity("run", run=do_import),
    ])


def build_export_workflow(params: dict, runtime) -> WorkflowGraph:
    user = params["user"]

    def do_export(ctx: ActivityContext):
        mydb = runtime.catalog.mydb_of(user)
        if mydb is None:
            raise RuntimeError(f"user {user!r} has no MyDB")
        node = runtime.env.dataset_node(mydb)
        backend = runtime.env.backend(node)
        db_path = backend._databases[mydb.name.lower()]
        activity = Activity(
            "export.exec", kind=ActivityKind.EXPORT_TABLE, delegate="assigned-node",
            params={
                "data-dir": str(Path(db_path).parent),
                "database": mydb.name,
                "table": params["table"],
                "format": params.get("format", "csv"),
                "dest": params["dest"],
                "node": node,
            })
        ctx.node = node
        out, _ = _delegate(ctx, runtime, activity)
        return out.get("file", params["dest"])

    return WorkflowGraph(steps=[Activity("export", run=do_export)])


def _delegate(ctx: ActivityContext, runtime, activity: Activity):
    """Run a kind-based activity on the assigned node's agent, or in-process."""
    from .agent import AgentClient, run_activity_locally

    ctx.check_cancel()
    address = runtime.agents.get(ctx.node) if ctx.node is not None else None
    if address is not None:
        return AgentClient(*address).call(activity.kind.value, activity.params)
    return run_activity_locally(activity.kind.value, activity.params)


register_workflow("query", build_query_workflow)
register_workflow("import", build_import_workflow)
register_workflow("export", build_export_workflow)
