"""Scalar value handling shared by the engine and the exchange layer.

The type system is five scalar types: integer, float, text, boolean,
timestamp.  Timestamps are carried as timezone-aware UTC datetimes and
stored/serialized in one fixed-width RFC 3339 form so that lexicographic
comparison of stored text matches chronological order.
"""

from __future__ import annotations

import datetime as dt
import re

# Fixed-width: microseconds always present, always UTC. Width-stable text
# keeps string comparison consistent with time order inside the engine.
_TS_FORMAT = "%Y-%m-%dT%H:%M:%S.%fZ"
_TS_RE = re.compile(
    r"^\d{4}-\d{2}-\d{2}[Tt ]\d{2}:\d{2}:\d{2}(\.\d+)?([Zz]|[+-]\d{2}:\d{2})$"
)


def format_timestamp(value: dt.datetime) -> str:
    if value.tzinfo is None:
        value = value.replace(tzinfo=dt.timezone.utc)
    return value.astimezone(dt.timezone.utc).strftime(_TS_FORMAT)


def parse_timestamp(text: str) -> dt.datetime:
    """Parse any RFC 3339 timestamp; result is UTC-normalized."""
    if not _TS_RE.match(text):
        raise ValueError(f"not an RFC 3339 timestamp: {text!r}")
    normalized = text.strip().replace(" ", "T")
    if normalized.endswith(("Z", "z")):
        normalized = normalized[:-1] + "+00:00"
    parsed = dt.datetime.fromisoformat(normalized)
    return parsed.astimezone(dt.timezone.utc)


def looks_like_timestamp(text: str) -> bool:
    return bool(_TS_RE.match(text))
