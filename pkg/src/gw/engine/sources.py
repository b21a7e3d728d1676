"""Fetch sources for remote-table caching.

A fetch builds ``SELECT <pruned columns> FROM <table> [WHERE <pushdown>]``
as a tree.  For a remote source the statement crosses the wire as text in
the source's own dialect and is parsed back on the far side, exactly as a
foreign server would receive it.
"""

from __future__ import annotations

from typing import Iterator, Optional

from ..schema.model import ColumnSchema, TableSchema
from ..sql.ast import NodeKind, SyntaxNode, name_leaf
from ..sql.dialect import get_dialect
from ..sql.parser import parse
from ..sql.render import render
from ..sql.transform import strip_column_qualifiers
from .backend import DEFAULT_BATCH_SIZE, NodeBackend, RowBatch


def build_fetch_statement(table: str, columns: list[str],
                          predicate: Optional[SyntaxNode]) -> SyntaxNode:
    """Single-table SELECT of the pruned columns with the pushdown applied."""
    items = [
        SyntaxNode(NodeKind.SELECT_ITEM,
                   [SyntaxNode(NodeKind.COLUMN_REF, [name_leaf(c)])])
        for c in columns
    ]
    source = SyntaxNode(NodeKind.TABLE_SOURCE,
                        [SyntaxNode(NodeKind.TABLE_REF, [name_leaf(table)])])
    children = [
        SyntaxNode(NodeKind.SELECT_LIST, items),
        SyntaxNode(NodeKind.FROM_CLAUSE, [source]),
    ]
    if predicate is not None:
        children.append(
            SyntaxNode(NodeKind.WHERE_CLAUSE, [strip_column_qualifiers(predicate)]))
    return SyntaxNode(NodeKind.SELECT_STATEMENT, children)


def _pruned_schema(full: TableSchema, columns: list[str]) -> list[ColumnSchema]:
    by_name = {c.name.lower(): c for c in full.columns}
    return [by_name[c.lower()] for c in columns]


class LocalTableSource:
    """Reads a table that lives on a cluster node reachable in-process."""

    def __init__(self, backend: NodeBackend, database: str, schema: TableSchema):
        self.backend = backend
        self.database = database
        self.schema = schema

    def open(self, columns: list[str], predicate: Optional[SyntaxNode],
             batch_size: int = DEFAULT_BATCH_SIZE) -> tuple[TableSchema, Iterator[RowBatch]]:
        statement = build_fetch_statement(self.schema.name, columns, predicate)
        pruned = _pruned_schema(self.schema, columns)
        _, batches = self.backend.run_statement(
            self.database, statement, expected_schema=pruned, batch_size=batch_size)
        return TableSchema(self.schema.name, pruned), batches


class DialectTextSource:
    """Reads from a simulated remote server speaking its own SQL flavor.

    The fetch statement is rendered to text in the remote dialect, handed
    across the boundary, and re-parsed on the remote side before running.
    """

    def __init__(self, backend: NodeBackend, database: str, schema: TableSchema,
                 dialect_name: str):
        self.backend = backend
        self.database = database
        self.schema = schema
        self.dialect = get_dialect(dialect_name)

    def open(self, columns: list[str], predicate: Optional[SyntaxNode],
             batch_size: int = DEFAULT_BATCH_SIZE) -> tuple[TableSchema, Iterator[RowBatch]]:
        statement = build_fetch_statement(self.schema.name, columns, predicate)
        wire_text = render(statement, self.dialect)
        received = parse(wire_text, self.dialect)
        pruned = _pruned_schema(self.schema, columns)
        _, batches = self.backend.run_statement(
            self.database, received, expected_schema=pruned, batch_size=batch_size)
        return TableSchema(self.schema.name, pruned), batches
