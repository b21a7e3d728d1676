"""Most-restrictive single-table predicate extraction.

Works solely from the query text (no statistics): the WHERE tree is
normalized to a conjunction of clauses, each clause a disjunction of
atom-conjunctions.  A clause contributes to the target table's predicate
only if every disjunct contains at least one atom over that table alone;
the contribution is the disjunction of those per-disjunct restrictions.
Everything else falls back to TRUE, which is always sound.
"""

from __future__ import annotations

from ..schema.resolve import ColumnBinding, TableBinding
from ..sql.ast import NodeKind, SyntaxNode, find_nodes
from ..sql.transform import conjoin, disjoin, literal_node

# Beyond this many disjuncts a clause is dropped instead of expanded; the
# dropped clause contributes TRUE, which keeps the result sound.
EXPANSION_CAP = 1024

_BOOL_KINDS = (NodeKind.AND_EXPR, NodeKind.OR_EXPR, NodeKind.NOT_EXPR)


def true_literal() -> SyntaxNode:
    return literal_node(True)


def is_true_literal(node: SyntaxNode) -> bool:
    return node.kind == NodeKind.BOOL_LIT and node.leaf_value() == "TRUE"


class _CapExceeded(Exception):
    pass


def extract_pushdown_predicate(where: SyntaxNode | None, table: TableBinding) -> SyntaxNode:
    """The most restrictive predicate over ``table``'s columns implied by ``where``.

    ``where`` is the resolved boolean expression (not the WHERE_CLAUSE node);
    None means no WHERE and yields TRUE.
    """
    if where is None:
        return true_literal()

    clauses = _to_clauses(_push_not_inward(where))

    contributions: list[SyntaxNode] = []
    for clause in clauses:
        restrictions = []
        for disjunct in clause:
            mine = [a for a in disjunct if _references_only(a, table)]
            if not mine:
                break
            restrictions.append(conjoin(*[a.clone() for a in mine]))
        else:
            contributions.append(disjoin(*restrictions))

    if not contributions:
        return true_literal()
    return conjoin(*contributions)


def _push_not_inward(node: SyntaxNode) -> SyntaxNode:
    """Negation normal form: NOT sinks through AND/OR; atoms keep their NOT."""
    if node.kind == NodeKind.NOT_EXPR:
        inner = node.children[0]
        if inner.kind == NodeKind.AND_EXPR:
            return SyntaxNode(NodeKind.OR_EXPR, [
                _push_not_inward(SyntaxNode(NodeKind.NOT_EXPR, [c])) for c in inner.children])
        if inner.kind == NodeKind.OR_EXPR:
            return SyntaxNode(NodeKind.AND_EXPR, [
                _push_not_inward(SyntaxNode(NodeKind.NOT_EXPR, [c])) for c in inner.children])
        if inner.kind == NodeKind.NOT_EXPR:
            return _push_not_inward(inner.children[0])
        return node
    if node.kind in (NodeKind.AND_EXPR, NodeKind.OR_EXPR):
        return SyntaxNode(node.kind, [_push_not_inward(c) for c in node.children])
    return node


def _to_clauses(node: SyntaxNode) -> list[list[list[SyntaxNode]]]:
    """Conjunction of clauses; clause: disjunction of atom-conjunctions."""
    if node.kind == NodeKind.AND_EXPR:
        out = []
        for child in node.children:
            out.extend(_to_clauses(child))
        return out
    if node.kind == NodeKind.OR_EXPR:
        try:
            return [_to_disjuncts(node)]
        except _CapExceeded:
            return []  # clause dropped, contributes TRUE
    return [[[node]]]


def _to_disjuncts(node: SyntaxNode) -> list[list[SyntaxNode]]:
    """Disjunctive form of ``node``: list of conjunctions of atoms."""
    if node.kind == NodeKind.OR_EXPR:
        out = []
        for child in node.children:
            out.extend(_to_disjuncts(child))
            if len(out) > EXPANSION_CAP:
                raise _CapExceeded
        return out
    if node.kind == NodeKind.AND_EXPR:
        product: list[list[SyntaxNode]] = [[]]
        for child in node.children:
            branches = _to_disjuncts(child)
            product = [combo + branch for combo in product for branch in branches]
            if len(product) > EXPANSION_CAP:
                raise _CapExceeded
        return product
    return [[node]]


def _references_only(atom: SyntaxNode, table: TableBinding) -> bool:
    """True if every column in the atom binds to ``table`` (constants qualify)."""
    for ref in find_nodes(atom, NodeKind.COLUMN_REF):
        binding: ColumnBinding = ref.annotations["binding"]
        if binding.table is not table:
            return False
    return True
