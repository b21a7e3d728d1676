"""Parse-tree nodes and traversal helpers.

Every query in the system is represented and manipulated as a tree of
:class:`SyntaxNode`; text exists only at the edges (parse in, render out).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterator, Optional

from .tokens import Token, TokenKind, identifier_value


class NodeKind(Enum):
    SELECT_STATEMENT = "select-statement"
    ROW_LIMIT = "row-limit"
    SELECT_LIST = "select-list"
    SELECT_ITEM = "select-item"
    STAR = "star"
    INTO_CLAUSE = "into-clause"
    FROM_CLAUSE = "from-clause"
    TABLE_SOURCE = "table-source"
    TABLE_REF = "table-ref"
    INNER_JOIN = "inner-join"
    LEFT_JOIN = "left-join"
    CROSS_JOIN = "cross-join"
    WHERE_CLAUSE = "where-clause"
    GROUP_BY_CLAUSE = "group-by-clause"
    HAVING_CLAUSE = "having-clause"
    ORDER_BY_CLAUSE = "order-by-clause"
    ORDER_ITEM = "order-item"
    PARTITION_BY_CLAUSE = "partition-by-clause"

    OR_EXPR = "or-expression"
    AND_EXPR = "and-expression"
    NOT_EXPR = "not-expression"
    COMPARISON = "comparison"
    IS_NULL = "is-null"
    IS_NOT_NULL = "is-not-null"
    BINARY_EXPR = "binary-expression"
    UNARY_EXPR = "unary-expression"
    FUNCTION_CALL = "function-call"
    COLUMN_REF = "column-ref"

    NAME = "name"
    OPERATOR = "operator"
    DIRECTION = "direction"
    NUMBER_LIT = "number-literal"
    STRING_LIT = "string-literal"
    BOOL_LIT = "boolean-literal"
    NULL_LIT = "null-literal"


# Leaf kinds compare by semantic value, not verbatim text.
_CASELESS_LEAVES = {NodeKind.OPERATOR, NodeKind.DIRECTION, NodeKind.BOOL_LIT,
                    NodeKind.NULL_LIT, NodeKind.STAR}


@dataclass
class SyntaxNode:
    """Mutable parse-tree node: a leaf iff it carries a token and no children."""

    kind: NodeKind
    children: list["SyntaxNode"] = field(default_factory=list)
    token: Optional[Token] = None
    annotations: dict[str, Any] = field(default_factory=dict)

    @property
    def is_leaf(self) -> bool:
        return self.token is not None and not self.children

    def child(self, kind: NodeKind) -> Optional["SyntaxNode"]:
        """First direct child of the given kind, or None."""
        for c in self.children:
            if c.kind == kind:
                return c
        return None

    def walk(self) -> Iterator["SyntaxNode"]:
        """Pre-order traversal including self."""
        yield self
        for c in self.children:
            yield from c.walk()

    def clone(self) -> "SyntaxNode":
        """Structural copy of the subtree.

        Tokens are immutable and shared; annotation values (resolution
        bindings) are shared by reference so they keep pointing into the
        catalog snapshot they were resolved against.
        """
        return SyntaxNode(
            kind=self.kind,
            children=[c.clone() for c in self.children],
            token=self.token,
            annotations=dict(self.annotations),
        )

    def leaf_value(self) -> str:
        """Comparable value of a leaf (identifier unquoted, keywords folded)."""
        assert self.token is not None
        if self.kind == NodeKind.NAME:
            return identifier_value(self.token)
        if self.kind in _CASELESS_LEAVES:
            return self.token.text.upper()
        return self.token.text

    def __repr__(self) -> str:
        if self.is_leaf:
            return f"<{self.kind.value} {self.token.text!r}>"
        return f"<{self.kind.value} [{len(self.children)}]>"


def name_leaf(value: str) -> SyntaxNode:
    """Build a NAME leaf from a bare identifier value."""
    return SyntaxNode(NodeKind.NAME, token=Token(TokenKind.IDENTIFIER, value, -1, -1))


def leaf(kind: NodeKind, text: str, token_kind: TokenKind = TokenKind.KEYWORD) -> SyntaxNode:
    return SyntaxNode(kind, token=Token(token_kind, text, -1, -1))


def find_nodes(node: SyntaxNode, kind: NodeKind) -> list[SyntaxNode]:
    """All descendants (including the root) of the given kind, document order."""
    return [n for n in node.walk() if n.kind == kind]


def trees_equal(a: SyntaxNode, b: SyntaxNode) -> bool:
    """Structural isomorphism: kinds, shape, and leaf values (spans ignored)."""
    if a.kind != b.kind or len(a.children) != len(b.children):
        return False
    if a.is_leaf != b.is_leaf:
        return False
    if a.is_leaf and a.leaf_value() != b.leaf_value():
        return False
    return all(trees_equal(x, y) for x, y in zip(a.children, b.children))


def column_ref_parts(node: SyntaxNode) -> tuple[Optional[str], Optional[str], str]:
    """(dataset, table-or-alias, column) of a COLUMN_REF; missing parts are None."""
    parts = [c.leaf_value() for c in node.children]
    if len(parts) == 1:
        return None, None, parts[0]
    if len(parts) == 2:
        return None, parts[0], parts[1]
    return parts[0], parts[1], parts[2]


def table_ref_parts(node: SyntaxNode) -> tuple[Optional[str], str]:
    """(dataset, table) of a TABLE_REF; dataset is None when unqualified."""
    parts = [c.leaf_value() for c in node.children]
    if len(parts) == 1:
        return None, parts[0]
    return parts[0], parts[1]


def table_source_alias(source: SyntaxNode) -> Optional[str]:
    """Explicit alias of a TABLE_SOURCE, or None."""
    for c in source.children:
        if c.kind == NodeKind.NAME:
            return c.leaf_value()
    return None
