"""Physical database provisioning from registry definitions.

Instantiating a database version creates the physical store on the node,
applies the definition's schema script, and registers the instance; mini
versions get Bernoulli-sampled rows from a full instance under a recorded
seed so the sample is reproducible.
"""

from __future__ import annotations

import random
from typing import Optional

from ..engine.backend import NodeBackend
from .discovery import _version_database_name
from .model import Entity, EntityType
from .store import RegistryStore


class ProvisionError(Exception):
    pass


def data_volumes(store: RegistryStore, machine: Entity) -> list[Entity]:
    return [
        v for v in store.children(machine.id, EntityType.DISK_VOLUME)
        if "data" in v.prop("flags", "")
    ]


def instantiate_database(
    store: RegistryStore,
    definition: Entity,
    version: Entity,
    machine: Entity,
    backend: NodeBackend,
    sample_source: Optional[tuple[NodeBackend, str]] = None,
) -> Entity:
    """Create the physical database for ``version`` on ``machine``."""
    volumes = data_volumes(store, machine)
    if not volumes:
        raise ProvisionError(
            f"machine {machine.name!r} has no data-flagged disk volume")

    db_name = _version_database_name(definition, version)
    fraction = float(version.prop("sample-fraction", "1"))
    script = definition.prop("schema-script", "")

    backend.ensure_database(db_name)
    try:
        if script:
            backend.run_script(db_name, script)
        if fraction < 1.0:
            if sample_source is None:
                raise ProvisionError(
                    "a mini version needs a full instance to sample from")
            seed = int(version.prop("sample-seed", "0"))
            _bernoulli_fill(backend, db_name, sample_source, fraction, seed)
    except Exception:
        backend.drop_database(db_name)
        raise

    path = backend._databases[db_name.lower()]
    volume = next((v for v in volumes if str(path).startswith(v.prop("path"))),
                  volumes[0])
    return store.create_entity(
        EntityType.DATABASE_INSTANCE, machine.name, version.id,
        {
            "machine": machine.name,
            "database": db_name,
            "volume": volume.name,
            "file": str(path),
        })


def _bernoulli_fill(backend: NodeBackend, db_name: str,
                    source: tuple[NodeBackend, str], fraction: float,
                    seed: int) -> None:
    src_backend, src_db = source
    rng = random.Random(seed)
    for table in src_backend.introspect_database(src_db):
        _, batches = src_backend.run_sql_text(
            src_db, f"SELECT * FROM {src_backend._quote(table.name)}",
            expected_schema=table.columns)
        kept = []
        for batch in batches:
            kept.extend(row for row in batch.rows if rng.random() < fraction)
        if kept:
            backend.insert_rows(db_name, table, kept)
