"""Per-user MyDB sandboxes.

Every registered user gets a small private database where query results
materialize; INTO writes beyond the row quota fail the job.
"""

from __future__ import annotations

from typing import Optional

from ..schema.catalog import Catalog
from ..schema.model import Dataset, DatasetKind
from .backend import NodeBackend


def mydb_name(user: str) -> str:
    return f"mydb_{user.lower()}"


def create_user_mydb(
    user: str,
    node: NodeBackend,
    catalog: Catalog,
    register_provider: Optional[object] = None,
) -> Dataset:
    """Create (or adopt) the user's MyDB on ``node`` and register it."""
    name = mydb_name(user)
    node.ensure_database(name)
    try:
        existing = catalog.dataset(name)
        catalog.bind_mydb(user, name)
        return existing
    except Exception:
        pass
    dataset = Dataset(name, DatasetKind.MYDB, dialect_name=node.dialect_name,
                      location=node.node_id)
    catalog.register(dataset, register_provider if register_provider is not None else node)
    catalog.bind_mydb(user, name)
    return dataset
