"""Hand-written recursive-descent parser for the extended SELECT grammar.

Covers: select list with ``*``/expressions/aliases, ``dataset:table``
qualified names, INNER/LEFT/CROSS JOIN with ON, WHERE with AND/OR/NOT,
comparisons, arithmetic, parentheses and function calls, GROUP BY, HAVING,
ORDER BY ASC/DESC, optional INTO, optional PARTITION BY on the first table
after FROM, and the dialect's row-limit form.

Operator precedence (loosest first): OR, AND, NOT, comparison, additive,
multiplicative, unary; all left-associative.
"""

from __future__ import annotations

from typing import Optional, Sequence

from .ast import NodeKind, SyntaxNode
from .dialect import BASE, DialectRules, RowLimitStyle
from .tokens import Token, TokenKind, tokenize


class ParseError(Exception):
    """Syntax error with byte offset and the token set that was expected."""

    def __init__(self, message: str, offset: int, expected: Sequence[str] = ()):
        detail = f"{message} at offset {offset}"
        if expected:
            detail += f" (expected {', '.join(sorted(expected))})"
        super().__init__(detail)
        self.offset = offset
        self.expected = frozenset(expected)


class SemanticError(Exception):
    """Structurally valid input violating a grammar-level rule."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


_COMPARISON_OPS = {"=", "<>", "!=", "<", ">", "<=", ">="}
_ADDITIVE_OPS = {"+", "-"}
_MULTIPLICATIVE_OPS = {"*", "/", "%"}


def parse(text: str, dialect: DialectRules = BASE) -> SyntaxNode:
    """Parse ``text`` under ``dialect`` into a SELECT_STATEMENT tree."""
    tokens = [t for t in tokenize(text) if t.kind not in (TokenKind.WHITESPACE, TokenKind.COMMENT)]
    parser = _Parser(tokens, dialect, len(text))
    return parser.parse_statement()


class _Parser:
    def __init__(self, tokens: list[Token], dialect: DialectRules, eof_offset: int):
        self.tokens = tokens
        self.dialect = dialect
        self.pos = 0
        self.eof_offset = eof_offset

    # -- token plumbing ----------------------------------------------------

    def peek(self) -> Optional[Token]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def at_keyword(self, *words: str) -> bool:
        t = self.peek()
        return t is not None and t.kind == TokenKind.KEYWORD and t.upper in words

    def take(self) -> Token:
        t = self.peek()
        if t is None:
            raise ParseError("unexpected end of input", self.eof_offset)
        self.pos += 1
        return t

    def take_keyword(self, word: str) -> Token:
        t = self.peek()
        if t is None:
            raise ParseError("unexpected end of input", self.eof_offset, [word])
        if t.kind != TokenKind.KEYWORD or t.upper != word:
            raise ParseError(f"unexpected token {t.text!r}", t.start, [word])
        return self.take()

    def accept_keyword(self, *words: str) -> Optional[Token]:
        if self.at_keyword(*words):
            return self.take()
        return None

    def take_punct(self, ch: str) -> Token:
        t = self.peek()
        if t is None:
            raise ParseError("unexpected end of input", self.eof_offset, [ch])
        if t.kind not in (TokenKind.PUNCT, TokenKind.OPERATOR) or t.text != ch:
            raise ParseError(f"unexpected token {t.text!r}", t.start, [ch])
        return self.take()

    def accept_punct(self, ch: str) -> Optional[Token]:
        t = self.peek()
        if t is not None and t.kind in (TokenKind.PUNCT, TokenKind.OPERATOR) and t.text == ch:
            return self.take()
        return None

    def take_identifier(self, what: str = "identifier") -> Token:
        t = self.peek()
        if t is None:
            raise ParseError("unexpected end of input", self.eof_offset, [what])
        if t.kind != TokenKind.IDENTIFIER:
            raise ParseError(f"unexpected token {t.text!r}", t.start, [what])
        return self.take()

    # -- statement ---------------------------------------------------------

    def parse_statement(self) -> SyntaxNode:
        self.take_keyword("SELECT")
        root = SyntaxNode(NodeKind.SELECT_STATEMENT)

        if self.dialect.row_limit is RowLimitStyle.PREFIX_TOP and self.at_keyword("TOP"):
            self.take()
            root.children.append(self._row_limit())

        root.children.append(self.parse_select_list())

        if self.accept_keyword("INTO"):
            into = SyntaxNode(NodeKind.INTO_CLAUSE, [self.parse_table_ref()])
            root.children.append(into)

        self.take_keyword("FROM")
        root.children.append(self.parse_from_clause())

        if self.accept_keyword("WHERE"):
            root.children.append(SyntaxNode(NodeKind.WHERE_CLAUSE, [self.parse_expr()]))

        if self.accept_keyword("GROUP"):
            self.take_keyword("BY")
            items = [self.parse_expr()]
            while self.accept_punct(","):
                items.append(self.parse_expr())
            root.children.append(SyntaxNode(NodeKind.GROUP_BY_CLAUSE, items))

        if self.accept_keyword("HAVING"):
            root.children.append(SyntaxNode(NodeKind.HAVING_CLAUSE, [self.parse_expr()]))

        if self.accept_keyword("ORDER"):
            self.take_keyword("BY")
            items = [self.parse_order_item()]
            while self.accept_punct(","):
                items.append(self.parse_order_item())
            root.children.append(SyntaxNode(NodeKind.ORDER_BY_CLAUSE, items))

        if self.dialect.row_limit is RowLimitStyle.SUFFIX_LIMIT and self.at_keyword("LIMIT"):
            self.take()
            # Tree position of the row limit is canonical (right after SELECT);
            # only its textual placement is dialect-specific.
            root.children.insert(0, self._row_limit())

        self.accept_punct(";")
        trailing = self.peek()
        if trailing is not None:
            raise ParseError(f"unexpected token {trailing.text!r} after statement", trailing.start)
        return root

    def _row_limit(self) -> SyntaxNode:
        t = self.peek()
        if t is None or t.kind != TokenKind.NUMBER:
            offset = self.eof_offset if t is None else t.start
            raise ParseError("row limit requires a number", offset, ["number"])
        return SyntaxNode(NodeKind.ROW_LIMIT, [SyntaxNode(NodeKind.NUMBER_LIT, token=self.take())])

    def parse_order_item(self) -> SyntaxNode:
        item = SyntaxNode(NodeKind.ORDER_ITEM, [self.parse_expr()])
        direction = self.accept_keyword("ASC", "DESC")
        if direction is not None:
            item.children.append(SyntaxNode(NodeKind.DIRECTION, token=direction))
        return item

    def parse_select_list(self) -> SyntaxNode:
        items = [self.parse_select_item()]
        while self.accept_punct(","):
            items.append(self.parse_select_item())
        return SyntaxNode(NodeKind.SELECT_LIST, items)

    def parse_select_item(self) -> SyntaxNode:
        star = self.accept_punct("*")
        if star is not None:
            return SyntaxNode(NodeKind.SELECT_ITEM, [SyntaxNode(NodeKind.STAR, token=star)])
        expr = self.parse_expr()
        item = SyntaxNode(NodeKind.SELECT_ITEM, [expr])
        if self.accept_keyword("AS"):
            item.children.append(SyntaxNode(NodeKind.NAME, token=self.take_identifier("alias")))
        elif self.peek() is not None and self.peek().kind == TokenKind.IDENTIFIER:
            item.children.append(SyntaxNode(NodeKind.NAME, token=self.take()))
        return item

    # -- FROM / joins --------------------------------------------------------

    def parse_from_clause(self) -> SyntaxNode:
        clause = SyntaxNode(NodeKind.FROM_CLAUSE, [self.parse_table_source(first=True)])
        while True:
            if self.at_keyword("JOIN", "INNER"):
                self.accept_keyword("INNER")
                self.take_keyword("JOIN")
                source = self.parse_table_source(first=False)
                self.take_keyword("ON")
                clause.children.append(SyntaxNode(NodeKind.INNER_JOIN, [source, self.parse_expr()]))
            elif self.at_keyword("LEFT"):
                self.take()
                self.accept_keyword("OUTER")
                self.take_keyword("JOIN")
                source = self.parse_table_source(first=False)
                self.take_keyword("ON")
                clause.children.append(SyntaxNode(NodeKind.LEFT_JOIN, [source, self.parse_expr()]))
            elif self.at_keyword("CROSS"):
                self.take()
                self.take_keyword("JOIN")
                clause.children.append(SyntaxNode(NodeKind.CROSS_JOIN, [self.parse_table_source(first=False)]))
            else:
                return clause

    def parse_table_source(self, first: bool) -> SyntaxNode:
        source = SyntaxNode(NodeKind.TABLE_SOURCE, [self.parse_table_ref()])
        if self.accept_keyword("AS"):
            source.children.append(SyntaxNode(NodeKind.NAME, token=self.take_identifier("alias")))
        elif self.peek() is not None and self.peek().kind == TokenKind.IDENTIFIER:
            source.children.append(SyntaxNode(NodeKind.NAME, token=self.take()))
        if self.at_keyword("PARTITION"):
            start = self.take().start
            self.take_keyword("BY")
            column = self.parse_qualified_name()
            if column.kind != NodeKind.COLUMN_REF:
                raise SemanticError("PARTITION BY requires a column reference", start)
            if not first:
                raise SemanticError("PARTITION BY is only allowed on the first table after FROM", start)
            source.children.append(SyntaxNode(NodeKind.PARTITION_BY_CLAUSE, [column]))
        return source

    def parse_table_ref(self) -> SyntaxNode:
        name = self.take_identifier("table name")
        ref = SyntaxNode(NodeKind.TABLE_REF, [SyntaxNode(NodeKind.NAME, token=name)])
        if self.accept_punct(":"):
            table = self.take_identifier("table name")
            ref.children.append(SyntaxNode(NodeKind.NAME, token=table))
        return ref

    # -- expressions ---------------------------------------------------------

    def parse_expr(self) -> SyntaxNode:
        return self.parse_or()

    def parse_or(self) -> SyntaxNode:
        operands = [self.parse_and()]
        while self.accept_keyword("OR"):
            operands.append(self.parse_and())
        if len(operands) == 1:
            return operands[0]
        return SyntaxNode(NodeKind.OR_EXPR, operands)

    def parse_and(self) -> SyntaxNode:
        operands = [self.parse_not()]
        while self.accept_keyword("AND"):
            operands.append(self.parse_not())
        if len(operands) == 1:
            return operands[0]
        return SyntaxNode(NodeKind.AND_EXPR, operands)

    def parse_not(self) -> SyntaxNode:
        if self.accept_keyword("NOT"):
            return SyntaxNode(NodeKind.NOT_EXPR, [self.parse_not()])
        return self.parse_comparison()

    def parse_comparison(self) -> SyntaxNode:
        left = self.parse_additive()
        t = self.peek()
        if t is not None and t.kind == TokenKind.OPERATOR and t.text in _COMPARISON_OPS:
            op = SyntaxNode(NodeKind.OPERATOR, token=self.take())
            return SyntaxNode(NodeKind.COMPARISON, [left, op, self.parse_additive()])
        if self.at_keyword("IS"):
            self.take()
            negated = self.accept_keyword("NOT") is not None
            self.take_keyword("NULL")
            kind = NodeKind.IS_NOT_NULL if negated else NodeKind.IS_NULL
            return SyntaxNode(kind, [left])
        return left

    def parse_additive(self) -> SyntaxNode:
        left = self.parse_multiplicative()
        while True:
            t = self.peek()
            if t is None or t.kind != TokenKind.OPERATOR or t.text not in _ADDITIVE_OPS:
                return left
            op = SyntaxNode(NodeKind.OPERATOR, token=self.take())
            left = SyntaxNode(NodeKind.BINARY_EXPR, [left, op, self.parse_multiplicative()])

    def parse_multiplicative(self) -> SyntaxNode:
        left = self.parse_unary()
        while True:
            t = self.peek()
            if t is None or t.kind != TokenKind.OPERATOR or t.text not in _MULTIPLICATIVE_OPS:
                return left
            op = SyntaxNode(NodeKind.OPERATOR, token=self.take())
            left = SyntaxNode(NodeKind.BINARY_EXPR, [left, op, self.parse_unary()])

    def parse_unary(self) -> SyntaxNode:
        t = self.peek()
        if t is not None and t.kind == TokenKind.OPERATOR and t.text in ("-", "+"):
            op = SyntaxNode(NodeKind.OPERATOR, token=self.take())
            return SyntaxNode(NodeKind.UNARY_EXPR, [op, self.parse_unary()])
        return self.parse_primary()

    def parse_primary(self) -> SyntaxNode:
        t = self.peek()
        if t is None:
            raise ParseError("unexpected end of input", self.eof_offset, ["expression"])

        if t.kind == TokenKind.NUMBER:
            return SyntaxNode(NodeKind.NUMBER_LIT, token=self.take())
        if t.kind == TokenKind.STRING:
            return SyntaxNode(NodeKind.STRING_LIT, token=self.take())
        if t.kind == TokenKind.KEYWORD and t.upper in ("TRUE", "FALSE"):
            return SyntaxNode(NodeKind.BOOL_LIT, token=self.take())
        if t.kind == TokenKind.KEYWORD and t.upper == "NULL":
            return SyntaxNode(NodeKind.NULL_LIT, token=self.take())
        if t.kind == TokenKind.PUNCT and t.text == "(":
            self.take()
            expr = self.parse_expr()
            self.take_punct(")")
            return expr
        if t.kind == TokenKind.IDENTIFIER:
            return self.parse_qualified_name()

        raise ParseError(f"unexpected token {t.text!r}", t.start, ["expression"])

    def parse_qualified_name(self) -> SyntaxNode:
        """Column reference ``[d:][t.]c`` or a function call ``f(...)``."""
        first = self.take_identifier()
        nxt = self.peek()

        if nxt is not None and nxt.kind == TokenKind.PUNCT and nxt.text == "(":
            self.take()
            call = SyntaxNode(NodeKind.FUNCTION_CALL, [SyntaxNode(NodeKind.NAME, token=first)])
            if self.accept_punct(")") is None:
                star = self.accept_punct("*")
                if star is not None:
                    call.children.append(SyntaxNode(NodeKind.STAR, token=star))
                else:
                    call.children.append(self.parse_expr())
                    while self.accept_punct(","):
                        call.children.append(self.parse_expr())
                self.take_punct(")")
            return call

        parts = [first]
        if self.accept_punct(":"):
            parts.append(self.take_identifier("table name"))
            self.take_punct(".")
            parts.append(self.take_identifier("column name"))
        elif self.accept_punct("."):
            parts.append(self.take_identifier("column name"))
        return SyntaxNode(NodeKind.COLUMN_REF, [SyntaxNode(NodeKind.NAME, token=p) for p in parts])
