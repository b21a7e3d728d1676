"""Parse-tree transformations.

All transformations return a new tree and leave the input untouched; nodes
outside the targeted kinds are preserved (locality is asserted in tests via
tree diffs).
"""

from __future__ import annotations

import datetime as dt
from typing import Mapping, Optional, Union

from .ast import (
    NodeKind,
    SyntaxNode,
    column_ref_parts,
    find_nodes,
    name_leaf,
    table_ref_parts,
    table_source_alias,
)
from .render import string_literal
from .tokens import Token, TokenKind

# Fully qualified table name: (dataset, table), case-folded for comparison.
TableName = tuple[str, str]

REMOVABLE_CLAUSES = {
    NodeKind.ROW_LIMIT,
    NodeKind.INTO_CLAUSE,
    NodeKind.WHERE_CLAUSE,
    NodeKind.GROUP_BY_CLAUSE,
    NodeKind.HAVING_CLAUSE,
    NodeKind.ORDER_BY_CLAUSE,
    NodeKind.PARTITION_BY_CLAUSE,
}


class RewriteError(Exception):
    pass


def remove_clause(node: SyntaxNode, clause_kind: NodeKind) -> SyntaxNode:
    """Copy of the tree with every node of ``clause_kind`` removed.

    Absent clauses are a no-op; only optional clauses may be removed.
    """
    if clause_kind not in REMOVABLE_CLAUSES:
        raise ValueError(f"{clause_kind.value} is not an optional clause")
    out = node.clone()
    _prune(out, clause_kind)
    return out


def _prune(node: SyntaxNode, kind: NodeKind) -> None:
    node.children = [c for c in node.children if c.kind != kind]
    for c in node.children:
        _prune(c, kind)


def _fold(name: str) -> str:
    # Identifier comparison is case-insensitive throughout.
    return name.lower()


def substitute_table_refs(
    node: SyntaxNode,
    mapping: Mapping[TableName, tuple[Optional[str], str]],
    default_dataset: Optional[str] = None,
) -> SyntaxNode:
    """Rewrite table references per ``mapping`` of (dataset, table) pairs.

    Matching table sources get the new reference; explicit aliases are kept,
    and column qualifiers that name the table directly are rewritten so
    references stay valid.  Unqualified tables match under
    ``default_dataset``.
    """
    folded = {(_fold(d), _fold(t)): v for (d, t), v in mapping.items()}
    out = node.clone()
    if not folded:
        return out

    # One scope: the grammar has no subqueries.
    sources = find_nodes(out, NodeKind.TABLE_SOURCE)
    rewritten: dict[str, tuple[Optional[str], str]] = {}  # original table name -> target
    effective_names: list[str] = []

    for source in sources:
        ref = source.children[0]
        dataset, table = table_ref_parts(ref)
        key = (_fold(dataset or default_dataset or ""), _fold(table))
        alias = table_source_alias(source)
        target = folded.get(key)
        if target is not None:
            new_dataset, new_table = target
            source.children[0] = _make_table_ref(new_dataset, new_table)
            if alias is None:
                rewritten[_fold(table)] = target
            effective_names.append(_fold(alias) if alias else _fold(new_table))
        else:
            effective_names.append(_fold(alias) if alias else _fold(table))

    dupes = sorted({n for n in effective_names if effective_names.count(n) > 1})
    if dupes:
        raise RewriteError(f"substitution makes table name(s) ambiguous: {dupes}")

    aliases = {_fold(a) for a in (table_source_alias(s) for s in sources) if a is not None}

    for col in find_nodes(out, NodeKind.COLUMN_REF):
        dataset, table, column = column_ref_parts(col)
        if table is None:
            continue
        if dataset is not None:
            target = folded.get((_fold(dataset), _fold(table)))
            if target is not None:
                col.children = _qualified_column(target, column)
        elif _fold(table) not in aliases and _fold(table) in rewritten:
            col.children = _qualified_column(rewritten[_fold(table)], column)
    return out


def _make_table_ref(dataset: Optional[str], table: str) -> SyntaxNode:
    parts = [name_leaf(dataset)] if dataset else []
    parts.append(name_leaf(table))
    return SyntaxNode(NodeKind.TABLE_REF, parts)


def _qualified_column(target: tuple[Optional[str], str], column: str) -> list[SyntaxNode]:
    # Qualify by the new table name; the dataset qualifier is redundant once
    # the FROM clause names it, and 2-part references stay alias-compatible.
    return [name_leaf(target[1]), name_leaf(column)]


# -- expression builders --------------------------------------------------

Scalar = Union[int, float, str, bool, dt.datetime, None]


def column_node(table: Optional[str], column: str) -> SyntaxNode:
    parts = [name_leaf(table)] if table else []
    parts.append(name_leaf(column))
    return SyntaxNode(NodeKind.COLUMN_REF, parts)


def literal_node(value: Scalar) -> SyntaxNode:
    if value is None:
        return SyntaxNode(NodeKind.NULL_LIT, token=Token(TokenKind.KEYWORD, "NULL", -1, -1))
    if isinstance(value, bool):
        text = "TRUE" if value else "FALSE"
        return SyntaxNode(NodeKind.BOOL_LIT, token=Token(TokenKind.KEYWORD, text, -1, -1))
    if isinstance(value, (int, float)):
        text = repr(value)
        if text.startswith("-"):
            inner = SyntaxNode(NodeKind.NUMBER_LIT, token=Token(TokenKind.NUMBER, text[1:], -1, -1))
            op = SyntaxNode(NodeKind.OPERATOR, token=Token(TokenKind.OPERATOR, "-", -1, -1))
            return SyntaxNode(NodeKind.UNARY_EXPR, [op, inner])
        return SyntaxNode(NodeKind.NUMBER_LIT, token=Token(TokenKind.NUMBER, text, -1, -1))
    if isinstance(value, dt.datetime):
        from ..engine.values import format_timestamp  # deferred: engine owns the canonical form

        return SyntaxNode(NodeKind.STRING_LIT,
                          token=Token(TokenKind.STRING, string_literal(format_timestamp(value)), -1, -1))
    return SyntaxNode(NodeKind.STRING_LIT, token=Token(TokenKind.STRING, string_literal(value), -1, -1))


def comparison(lhs: SyntaxNode, op: str, rhs: SyntaxNode) -> SyntaxNode:
    op_node = SyntaxNode(NodeKind.OPERATOR, token=Token(TokenKind.OPERATOR, op, -1, -1))
    return SyntaxNode(NodeKind.COMPARISON, [lhs, op_node, rhs])


def _flatten(kind: NodeKind, operands) -> list[SyntaxNode]:
    flat: list[SyntaxNode] = []
    for op in operands:
        if op is None:
            continue
        if op.kind == kind:
            flat.extend(op.children)
        else:
            flat.append(op)
    return flat


def conjoin(*operands: SyntaxNode) -> SyntaxNode:
    """AND of the operands, flattened; a single operand passes through."""
    flat = _flatten(NodeKind.AND_EXPR, operands)
    if not flat:
        raise ValueError("conjoin requires at least one operand")
    if len(flat) == 1:
        return flat[0]
    return SyntaxNode(NodeKind.AND_EXPR, flat)


def disjoin(*operands: SyntaxNode) -> SyntaxNode:
    flat = _flatten(NodeKind.OR_EXPR, operands)
    if not flat:
        raise ValueError("disjoin requires at least one operand")
    if len(flat) == 1:
        return flat[0]
    return SyntaxNode(NodeKind.OR_EXPR, flat)


def is_null(expr: SyntaxNode) -> SyntaxNode:
    return SyntaxNode(NodeKind.IS_NULL, [expr])


def strip_column_qualifiers(expr: SyntaxNode) -> SyntaxNode:
    """Copy of ``expr`` with every column reference reduced to its bare name.

    Used when a predicate extracted from a multi-table query is re-applied
    in a single-table statement where the original aliases do not exist.
    """
    out = expr.clone()
    for ref in find_nodes(out, NodeKind.COLUMN_REF):
        ref.children = ref.children[-1:]
    return out


def add_where_conjunct(statement: SyntaxNode, predicate: SyntaxNode) -> SyntaxNode:
    """Copy of the statement with ``predicate`` ANDed into its WHERE clause."""
    out = statement.clone()
    where = out.child(NodeKind.WHERE_CLAUSE)
    if where is None:
        where = SyntaxNode(NodeKind.WHERE_CLAUSE, [predicate])
        # WHERE sits right after FROM in canonical child order.
        idx = next(i for i, c in enumerate(out.children) if c.kind == NodeKind.FROM_CLAUSE)
        out.children.insert(idx + 1, where)
    else:
        where.children = [conjoin(where.children[0], predicate)]
    return out
