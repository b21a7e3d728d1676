"""Render a parse tree back to SQL text under a dialect.

Output is whitespace-normalized and canonical (keywords uppercased,
parentheses regenerated from precedence); it re-parses to an isomorphic
tree under the same dialect.
"""

from __future__ import annotations

import re

from .ast import NodeKind, SyntaxNode
from .dialect import DialectRules, RowLimitStyle
from .tokens import KEYWORDS


class RenderError(Exception):
    """Raised when a node kind cannot be expressed in the target dialect."""

    def __init__(self, node_kind: NodeKind, dialect: str, reason: str = ""):
        detail = f"cannot render {node_kind.value} in dialect {dialect!r}"
        if reason:
            detail += f": {reason}"
        super().__init__(detail)
        self.node_kind = node_kind


_PLAIN_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")

# Expression precedence; higher binds tighter.
_LEVELS = {
    NodeKind.OR_EXPR: 1,
    NodeKind.AND_EXPR: 2,
    NodeKind.NOT_EXPR: 3,
    NodeKind.COMPARISON: 4,
    NodeKind.IS_NULL: 4,
    NodeKind.IS_NOT_NULL: 4,
    NodeKind.BINARY_EXPR: 5,
    NodeKind.UNARY_EXPR: 7,
}
_MULTIPLICATIVE = {"*", "/", "%"}


def _level(node: SyntaxNode) -> int:
    if node.kind == NodeKind.BINARY_EXPR:
        return 6 if node.children[1].leaf_value() in _MULTIPLICATIVE else 5
    return _LEVELS.get(node.kind, 8)


def render_identifier(value: str, dialect: DialectRules) -> str:
    if _PLAIN_IDENT.match(value) and value.upper() not in KEYWORDS:
        return value
    return dialect.quote_identifier(value)


def string_literal(value: str) -> str:
    """SQL text of a string literal for the given Python value."""
    return "'" + value.replace("'", "''") + "'"


def render(node: SyntaxNode, dialect: DialectRules) -> str:
    """Render ``node`` (a statement or any expression subtree) to SQL text."""
    return _render(node, dialect)


def _render(node: SyntaxNode, d: DialectRules) -> str:
    k = node.kind

    if k == NodeKind.SELECT_STATEMENT:
        return _render_statement(node, d)

    if k == NodeKind.SELECT_LIST:
        return ", ".join(_render(c, d) for c in node.children)
    if k == NodeKind.SELECT_ITEM:
        parts = [_render(node.children[0], d)]
        if len(node.children) > 1:
            parts.append("AS " + render_identifier(node.children[1].leaf_value(), d))
        return " ".join(parts)
    if k == NodeKind.STAR:
        return "*"

    if k == NodeKind.INTO_CLAUSE:
        return "INTO " + _render(node.children[0], d)
    if k == NodeKind.FROM_CLAUSE:
        parts = [_render(node.children[0], d)]
        for join in node.children[1:]:
            parts.append(_render(join, d))
        return "FROM " + " ".join(parts)
    if k == NodeKind.TABLE_SOURCE:
        parts = [_render(node.children[0], d)]
        for c in node.children[1:]:
            if c.kind == NodeKind.NAME:
                parts.append("AS " + render_identifier(c.leaf_value(), d))
            else:
                parts.append(_render(c, d))
        return " ".join(parts)
    if k == NodeKind.TABLE_REF:
        names = [render_identifier(c.leaf_value(), d) for c in node.children]
        return d.dataset_separator.join(names)
    if k == NodeKind.INNER_JOIN:
        return "INNER JOIN " + _render(node.children[0], d) + " ON " + _render(node.children[1], d)
    if k == NodeKind.LEFT_JOIN:
        return "LEFT JOIN " + _render(node.children[0], d) + " ON " + _render(node.children[1], d)
    if k == NodeKind.CROSS_JOIN:
        return "CROSS JOIN " + _render(node.children[0], d)

    if k == NodeKind.WHERE_CLAUSE:
        return "WHERE " + _render(node.children[0], d)
    if k == NodeKind.GROUP_BY_CLAUSE:
        return "GROUP BY " + ", ".join(_render(c, d) for c in node.children)
    if k == NodeKind.HAVING_CLAUSE:
        return "HAVING " + _render(node.children[0], d)
    if k == NodeKind.ORDER_BY_CLAUSE:
        return "ORDER BY " + ", ".join(_render(c, d) for c in node.children)
    if k == NodeKind.ORDER_ITEM:
        parts = [_render(node.children[0], d)]
        if len(node.children) > 1:
            parts.append(node.children[1].leaf_value())
        return " ".join(parts)
    if k == NodeKind.PARTITION_BY_CLAUSE:
        return "PARTITION BY " + _render(node.children[0], d)

    if k in (NodeKind.OR_EXPR, NodeKind.AND_EXPR):
        word = " OR " if k == NodeKind.OR_EXPR else " AND "
        return word.join(_operand(c, _level(node), first=(i == 0), d=d)
                         for i, c in enumerate(node.children))
    if k == NodeKind.NOT_EXPR:
        return "NOT " + _operand(node.children[0], _level(node), first=False, d=d)
    if k == NodeKind.COMPARISON:
        lhs, op, rhs = node.children
        return " ".join((_operand(lhs, 4, True, d), op.leaf_value(), _operand(rhs, 4, False, d)))
    if k == NodeKind.IS_NULL:
        return _operand(node.children[0], 4, True, d) + " IS NULL"
    if k == NodeKind.IS_NOT_NULL:
        return _operand(node.children[0], 4, True, d) + " IS NOT NULL"
    if k == NodeKind.BINARY_EXPR:
        lhs, op, rhs = node.children
        lvl = _level(node)
        return " ".join((_operand(lhs, lvl, True, d), op.leaf_value(), _operand(rhs, lvl, False, d)))
    if k == NodeKind.UNARY_EXPR:
        op, operand = node.children
        return op.leaf_value() + _operand(operand, 7, False, d)
    if k == NodeKind.FUNCTION_CALL:
        name = render_identifier(node.children[0].leaf_value(), d)
        args = ", ".join(_render(c, d) for c in node.children[1:])
        return f"{name}({args})"
    if k == NodeKind.COLUMN_REF:
        names = [render_identifier(c.leaf_value(), d) for c in node.children]
        if len(names) == 3:
            return names[0] + d.dataset_separator + names[1] + "." + names[2]
        return ".".join(names)

    if k == NodeKind.NUMBER_LIT or k == NodeKind.STRING_LIT:
        return node.token.text
    if k == NodeKind.BOOL_LIT:
        return d.boolean_true if node.leaf_value() == "TRUE" else d.boolean_false
    if k == NodeKind.NULL_LIT:
        return "NULL"
    if k == NodeKind.NAME:
        return render_identifier(node.leaf_value(), d)

    raise RenderError(k, d.name, "unknown node kind")


def _operand(child: SyntaxNode, parent_level: int, first: bool, d: DialectRules) -> str:
    text = _render(child, d)
    lvl = _level(child)
    # Left-associative: the first operand tolerates equal level, the rest do not.
    needs_parens = lvl < parent_level or (lvl == parent_level and not first)
    if needs_parens:
        return f"({text})"
    return text


def _render_statement(node: SyntaxNode, d: DialectRules) -> str:
    parts = ["SELECT"]
    limit = node.child(NodeKind.ROW_LIMIT)
    if limit is not None and d.row_limit is None:
        raise RenderError(NodeKind.ROW_LIMIT, d.name, "dialect has no row-limit form")
    if limit is not None and d.row_limit is RowLimitStyle.PREFIX_TOP:
        parts.append("TOP " + limit.children[0].token.text)

    for child in node.children:
        if child.kind == NodeKind.ROW_LIMIT:
            continue
        parts.append(_render(child, d))

    if limit is not None and d.row_limit is RowLimitStyle.SUFFIX_LIMIT:
        parts.append("LIMIT " + limit.children[0].token.text)
    return " ".join(parts)
