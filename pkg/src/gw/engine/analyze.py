"""Output-schema derivation for SELECT statements.

Destination tables (MyDB results, partition partials) need declared column
types before any row arrives, so the expression types are inferred from
the resolution bindings.
"""

from __future__ import annotations

from ..schema.model import ColumnSchema, DataType, TableSchema
from ..sql.ast import NodeKind, SyntaxNode

_AGGREGATES_INT = {"COUNT"}
_AGGREGATES_FLOAT = {"AVG"}
_AGGREGATES_PASSTHROUGH = {"SUM", "MIN", "MAX", "ABS"}
_FUNCS_INT = {"LENGTH"}


def expression_type(node: SyntaxNode) -> DataType:
    k = node.kind
    if k == NodeKind.COLUMN_REF:
        return node.annotations["binding"].column.data_type
    if k == NodeKind.NUMBER_LIT:
        text = node.token.text
        return DataType.FLOAT if ("." in text or "e" in text.lower()) else DataType.INTEGER
    if k == NodeKind.STRING_LIT:
        return DataType.TEXT
    if k == NodeKind.BOOL_LIT:
        return DataType.BOOLEAN
    if k == NodeKind.NULL_LIT:
        return DataType.TEXT
    if k == NodeKind.UNARY_EXPR:
        return expression_type(node.children[1])
    if k == NodeKind.BINARY_EXPR:
        op = node.children[1].leaf_value()
        lhs = expression_type(node.children[0])
        rhs = expression_type(node.children[2])
        if op == "/" or DataType.FLOAT in (lhs, rhs):
            return DataType.FLOAT
        return lhs
    if k == NodeKind.FUNCTION_CALL:
        name = node.children[0].leaf_value().upper()
        if name in _AGGREGATES_INT or name in _FUNCS_INT:
            return DataType.INTEGER
        if name in _AGGREGATES_FLOAT:
            return DataType.FLOAT
        if name in _AGGREGATES_PASSTHROUGH and len(node.children) > 1:
            arg = node.children[1]
            if arg.kind != NodeKind.STAR:
                return expression_type(arg)
        return DataType.TEXT
    if k in (NodeKind.COMPARISON, NodeKind.AND_EXPR, NodeKind.OR_EXPR,
             NodeKind.NOT_EXPR, NodeKind.IS_NULL, NodeKind.IS_NOT_NULL):
        return DataType.BOOLEAN
    return DataType.TEXT


def result_schema(statement: SyntaxNode, table_name: str) -> TableSchema:
    """Schema of the statement's output, with deterministic naming.

    An aliased item uses its alias; a bare column keeps its name; any other
    expression becomes ``col<i>`` (1-based).  Duplicate names get ``_2``,
    ``_3``, ... suffixes so the result is storable as a table.
    """
    select_list = statement.child(NodeKind.SELECT_LIST)
    raw: list[tuple[str, DataType, bool]] = []

    for i, item in enumerate(select_list.children, start=1):
        head = item.children[0]
        alias = item.children[1].leaf_value() if len(item.children) > 1 else None
        if head.kind == NodeKind.STAR:
            for cb in head.annotations.get("expansion", []):
                raw.append((cb.column.name, cb.column.data_type, cb.column.nullable))
            continue
        if alias is not None:
            name = alias
        elif head.kind == NodeKind.COLUMN_REF:
            name = head.annotations["binding"].column.name
        else:
            name = f"col{i}"
        nullable = True
        if head.kind == NodeKind.COLUMN_REF:
            nullable = head.annotations["binding"].column.nullable
        raw.append((name, expression_type(head), nullable))

    seen: dict[str, int] = {}
    columns: list[ColumnSchema] = []
    for name, dtype, nullable in raw:
        key = name.lower()
        count = seen.get(key, 0) + 1
        seen[key] = count
        final = name if count == 1 else f"{name}_{count}"
        columns.append(ColumnSchema(final, dtype, nullable=nullable))
    return TableSchema(table_name, columns)
