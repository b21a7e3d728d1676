"""Optional reuse of cached remote tables.

Off by default: the baseline behavior copies remote tables on every query.
When reuse is enabled, an exact-key hit (same table, columns, pushdown,
and source catalog version) skips the bulk copy; entries are LRU-evicted
above a byte budget and invalidated by key when the catalog moves on.
"""

from __future__ import annotations

import hashlib
import threading
import time
from dataclasses import dataclass, field


@dataclass
class CachedTable:
    key: str
    table_name: str
    rows: int
    approx_bytes: int
    created: float = field(default_factory=time.time)
    last_used: float = field(default_factory=time.time)


def cache_key(fetch_key: tuple, catalog_version: int) -> str:
    payload = repr((fetch_key, catalog_version)).encode()
    return hashlib.sha1(payload).hexdigest()[:16]


class TableCache:
    """Per-node cache index over tempdb tables."""

    def __init__(self, byte_budget: int = 64 * 1024 * 1024):
        self.byte_budget = byte_budget
        self._entries: dict[str, CachedTable] = {}
        self._lock = threading.Lock()

    def lookup(self, key: str) -> CachedTable | None:
        with self._lock:
            entry = self._entries.get(key)
            if entry is not None:
                entry.last_used = time.time()
            return entry

    def store(self, entry: CachedTable) -> list[CachedTable]:
        """Record an entry; returns evicted entries whose tables must be dropped."""
        with self._lock:
            entry.last_used = time.time()  # storing counts as a use
            self._entries[entry.key] = entry
            evicted = []
            total = sum(e.approx_bytes for e in self._entries.values())
            while total > self.byte_budget and len(self._entries) > 1:
                oldest = min(self._entries.values(), key=lambda e: e.last_used)
                if oldest.key == entry.key:
                    break
                del self._entries[oldest.key]
                total -= oldest.approx_bytes
                evicted.append(oldest)
            return evicted

    def drop(self, key: str) -> None:
        with self._lock:
            self._entries.pop(key, None)

    def entries(self) -> list[CachedTable]:
        with self._lock:
            return list(self._entries.values())
