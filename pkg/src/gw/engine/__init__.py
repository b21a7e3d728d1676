"""Simulated cluster execution layer: node backends, bulk copy, plan execution."""

from .analyze import result_schema
from .backend import (
    DEFAULT_BATCH_SIZE,
    EngineError,
    NodeBackend,
    RowBatch,
    qualify_table_refs,
)
from .bulkcopy import CopyError, OperationCancelled, TableSource, bulk_copy, is_marked_invalid
from .cache import CachedTable, TableCache, cache_key
from .execute import (
    ExecContext,
    ExecEnv,
    ExecutionError,
    FetchEvent,
    QuotaExceededError,
    StaleCatalogError,
    execute_distributed,
    execute_partition_branch,
    execute_partitioned,
)
from .mydb import create_user_mydb, mydb_name
from .sources import DialectTextSource, LocalTableSource, build_fetch_statement
from .values import format_timestamp, looks_like_timestamp, parse_timestamp

__all__ = [
    "DEFAULT_BATCH_SIZE", "EngineError", "NodeBackend", "RowBatch", "qualify_table_refs",
    "CopyError", "OperationCancelled", "TableSource", "bulk_copy", "is_marked_invalid",
    "CachedTable", "TableCache", "cache_key",
    "ExecContext", "ExecEnv", "ExecutionError", "FetchEvent",
    "QuotaExceededError", "StaleCatalogError",
    "execute_distributed", "execute_partition_branch", "execute_partitioned",
    "create_user_mydb", "mydb_name",
    "DialectTextSource", "LocalTableSource", "build_fetch_statement",
    "result_schema", "format_timestamp", "looks_like_timestamp", "parse_timestamp",
]
