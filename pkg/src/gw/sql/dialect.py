"""SQL dialect rules and the dialect plug-in registry.

Two dialects ship built in: ``base`` quotes identifiers as ``[x]`` and
spells the row limit as a leading ``TOP n``; ``variant`` quotes as ``"x"``
and uses a trailing ``LIMIT n``.  Additional flavors register by name.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional


class RowLimitStyle(Enum):
    PREFIX_TOP = "prefix-top"
    SUFFIX_LIMIT = "suffix-limit"


@dataclass(frozen=True)
class DialectRules:
    name: str
    quote_open: str
    quote_close: str
    row_limit: Optional[RowLimitStyle]
    boolean_true: str = "TRUE"
    boolean_false: str = "FALSE"
    dataset_separator: str = ":"

    def quote_identifier(self, value: str) -> str:
        # The close character escapes by doubling in both built-in dialects.
        return self.quote_open + value.replace(self.quote_close, self.quote_close * 2) + self.quote_close


BASE = DialectRules("base", "[", "]", RowLimitStyle.PREFIX_TOP)
VARIANT = DialectRules("variant", '"', '"', RowLimitStyle.SUFFIX_LIMIT)

_DIALECTS: dict[str, DialectRules] = {}


def register_dialect(rules: DialectRules) -> None:
    _DIALECTS[rules.name] = rules


def get_dialect(name: str) -> DialectRules:
    try:
        return _DIALECTS[name]
    except KeyError:
        raise KeyError(f"unknown dialect {name!r}") from None


register_dialect(BASE)
register_dialect(VARIANT)
