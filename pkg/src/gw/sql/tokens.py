"""Lossless SQL tokenizer.

Concatenating the ``text`` of the returned tokens reproduces the input
byte-for-byte; spans are non-overlapping and strictly increasing.  Both
quoting styles (``[x]`` and ``"x"``) are recognized regardless of dialect:
quoting is a rendering concern, input is accepted leniently.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum


class TokenKind(Enum):
    KEYWORD = "keyword"
    IDENTIFIER = "identifier"
    NUMBER = "number-literal"
    STRING = "string-literal"
    OPERATOR = "operator"
    PUNCT = "punctuation"
    WHITESPACE = "whitespace"
    COMMENT = "comment"


# Grammar keywords; matched case-insensitively, identifiers keep their case.
KEYWORDS = frozenset({
    "SELECT", "TOP", "INTO", "FROM", "AS", "INNER", "LEFT", "OUTER", "CROSS",
    "JOIN", "ON", "WHERE", "AND", "OR", "NOT", "IS", "NULL", "TRUE", "FALSE",
    "GROUP", "BY", "HAVING", "ORDER", "ASC", "DESC", "PARTITION", "LIMIT",
})


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str
    start: int
    end: int

    @property
    def upper(self) -> str:
        return self.text.upper()

    def __repr__(self) -> str:
        return f"Token({self.kind.name}, {self.text!r}, {self.start}:{self.end})"


class LexError(Exception):
    """Lexical error carrying the byte offset of the offending character."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


_NUMBER_RE = re.compile(r"\d+(?:\.\d+)?(?:[eE][+-]?\d+)?")
_WORD_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_WS_RE = re.compile(r"\s+")

# Multi-character operators first so `<=` does not lex as `<`, `=`.
_OPERATORS = ("<>", "!=", ">=", "<=", "=", "<", ">", "+", "-", "*", "/", "%")
_PUNCT = "(),.;:"


def tokenize(text: str) -> list[Token]:
    """Tokenize ``text`` into a lossless token stream."""
    tokens: list[Token] = []
    pos = 0
    n = len(text)

    def emit(kind: TokenKind, end: int) -> None:
        nonlocal pos
        tokens.append(Token(kind, text[pos:end], pos, end))
        pos = end

    while pos < n:
        ch = text[pos]

        m = _WS_RE.match(text, pos)
        if m:
            emit(TokenKind.WHITESPACE, m.end())
            continue

        if text.startswith("--", pos):
            nl = text.find("\n", pos)
            emit(TokenKind.COMMENT, n if nl < 0 else nl)
            continue

        if text.startswith("/*", pos):
            close = text.find("*/", pos + 2)
            if close < 0:
                raise LexError("unterminated block comment", pos)
            emit(TokenKind.COMMENT, close + 2)
            continue

        if ch == "'":
            emit(TokenKind.STRING, _scan_quoted(text, pos, "'", "'"))
            continue

        if ch == '"':
            emit(TokenKind.IDENTIFIER, _scan_quoted(text, pos, '"', '"'))
            continue

        if ch == "[":
            emit(TokenKind.IDENTIFIER, _scan_quoted(text, pos, "[", "]"))
            continue

        if ch.isdigit():
            m = _NUMBER_RE.match(text, pos)
            emit(TokenKind.NUMBER, m.end())
            continue

        m = _WORD_RE.match(text, pos)
        if m:
            kind = TokenKind.KEYWORD if m.group().upper() in KEYWORDS else TokenKind.IDENTIFIER
            emit(kind, m.end())
            continue

        op = next((op for op in _OPERATORS if text.startswith(op, pos)), None)
        if op:
            emit(TokenKind.OPERATOR, pos + len(op))
            continue

        if ch in _PUNCT:
            emit(TokenKind.PUNCT, pos + 1)
            continue

        raise LexError(f"unexpected character {ch!r}", pos)

    return tokens


def _scan_quoted(text: str, start: int, open_ch: str, close_ch: str) -> int:
    """Return the end offset of a quoted region; the close char escapes by doubling."""
    pos = start + 1
    n = len(text)
    while pos < n:
        if text[pos] == close_ch:
            if pos + 1 < n and text[pos + 1] == close_ch:
                pos += 2
                continue
            return pos + 1
        pos += 1
    kind = "string literal" if open_ch == "'" else "quoted identifier"
    raise LexError(f"unterminated {kind}", start)


def identifier_value(token: Token) -> str:
    """The identifier name with quoting stripped and escapes undone."""
    t = token.text
    if t.startswith('"'):
        return t[1:-1].replace('""', '"')
    if t.startswith("["):
        return t[1:-1].replace("]]", "]")
    return t


def string_value(token: Token) -> str:
    """The string literal's value with quotes stripped and '' unescaped."""
    return token.text[1:-1].replace("''", "'")
