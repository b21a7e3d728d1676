"""Extended-SQL front end: tokenizer, parser, tree transforms, rendering."""

from .ast import NodeKind, SyntaxNode, find_nodes, trees_equal
from .dialect import BASE, VARIANT, DialectRules, RowLimitStyle, get_dialect, register_dialect
from .parser import ParseError, SemanticError, parse
from .render import RenderError, render
from .tokens import LexError, Token, TokenKind, tokenize
from .transform import RewriteError, remove_clause, substitute_table_refs

__all__ = [
    "BASE", "VARIANT", "DialectRules", "RowLimitStyle",
    "NodeKind", "SyntaxNode", "Token", "TokenKind",
    "LexError", "ParseError", "SemanticError", "RenderError", "RewriteError",
    "tokenize", "parse", "render", "find_nodes", "trees_equal",
    "remove_clause", "substitute_table_refs", "get_dialect", "register_dialect",
]
