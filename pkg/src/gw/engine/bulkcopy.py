"""Bulk row movement: a bounded two-party producer/consumer pipeline.

The producer streams RowBatches from a source; the consumer inserts them
into the destination table.  Cancellation is cooperative and observed at
batch boundaries on both sides.
"""

from __future__ import annotations

import queue
import threading
from dataclasses import dataclass
from typing import Iterator, Optional, Protocol

from ..schema.model import TableSchema
from ..sql.ast import SyntaxNode
from .backend import NodeBackend, RowBatch

PIPELINE_DEPTH = 4  # bounded buffer, in batches


class OperationCancelled(Exception):
    pass


class CopyError(Exception):
    pass


class TableSource(Protocol):
    """Anything bulk_copy can read a pruned, filtered table from."""

    def open(self, columns: list[str], predicate: Optional[SyntaxNode],
             batch_size: int) -> tuple[TableSchema, Iterator[RowBatch]]:
        ...


@dataclass
class CopyStats:
    rows: int = 0
    batches: int = 0


_DONE = object()


def bulk_copy(
    batches: Iterator[RowBatch],
    dest_backend: NodeBackend,
    dest_database: str,
    dest_schema: TableSchema,
    cancel: Optional[threading.Event] = None,
    mark_invalid_on_error: bool = True,
) -> int:
    """Move every source row into the destination table; returns rows moved.

    The destination table must already exist with a matching schema.  On
    failure the destination is truncated and marked invalid; on
    cancellation an OperationCancelled surfaces for the caller to clean up.
    """
    buffer: queue.Queue = queue.Queue(maxsize=PIPELINE_DEPTH)
    failure: list[BaseException] = []

    def produce():
        try:
            for batch in batches:
                if cancel is not None and cancel.is_set():
                    raise OperationCancelled("bulk copy cancelled")
                buffer.put(batch)
        except BaseException as exc:  # surfaced on the consumer side
            failure.append(exc)
        finally:
            buffer.put(_DONE)

    producer = threading.Thread(target=produce, name="bulk-copy-producer", daemon=True)
    producer.start()

    stats = CopyStats()
    conn = dest_backend.connect(dest_database)
    try:
        while True:
            item = buffer.get()
            if item is _DONE:
                break
            if cancel is not None and cancel.is_set():
                raise OperationCancelled("bulk copy cancelled")
            batch: RowBatch = item
            if len(batch.columns) != len(dest_schema.columns):
                raise CopyError(
                    f"schema mismatch: source has {len(batch.columns)} columns, "
                    f"destination {dest_schema.name!r} has {len(dest_schema.columns)}")
            dest_backend.insert_rows(dest_database, dest_schema, batch.rows, conn=conn)
            stats.rows += len(batch)
            stats.batches += 1
        if failure:
            raise failure[0]
        conn.commit()
        return stats.rows
    except OperationCancelled:
        conn.rollback()
        raise
    except Exception:
        conn.rollback()
        if mark_invalid_on_error:
            _truncate_and_mark_invalid(dest_backend, dest_database, dest_schema.name)
        raise
    finally:
        producer.join(timeout=5)
        conn.close()


def _truncate_and_mark_invalid(backend: NodeBackend, database: str, table: str) -> None:
    conn = backend.connect(database)
    try:
        conn.execute(f"DELETE FROM {backend._quote(table)}")
        conn.execute("CREATE TABLE IF NOT EXISTS _gw_invalid (table_name TEXT PRIMARY KEY)")
        conn.execute("INSERT OR IGNORE INTO _gw_invalid (table_name) VALUES (?)", (table,))
        conn.commit()
    except Exception:
        pass
    finally:
        conn.close()


def is_marked_invalid(backend: NodeBackend, database: str, table: str) -> bool:
    conn = backend.connect(database)
    try:
        cur = conn.execute(
            "SELECT 1 FROM sqlite_master WHERE type='table' AND name='_gw_invalid'")
        if cur.fetchone() is None:
            return False
        cur = conn.execute("SELECT 1 FROM _gw_invalid WHERE table_name = ?", (table,))
        return cur.fetchone() is not None
    finally:
        conn.close()
