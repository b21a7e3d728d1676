"""Automatic discovery: reconcile a machine's live state with the registry.

Compares disk volumes, databases, and per-table row counts found on the
node against the registered entities; the resulting change set applies
transactionally or not at all.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..engine.backend import NodeBackend
from .model import Entity, EntityType
from .store import RegistryStore


class DiscoveryError(Exception):
    pass


@dataclass
class Addition:
    type: EntityType
    name: str
    parent_id: str
    properties: dict[str, str]


@dataclass
class Update:
    entity_id: str
    entity_name: str
    properties: dict[str, str]  # full new property map


@dataclass
class ChangeSet:
    machine: str
    additions: list[Addition] = field(default_factory=list)
    updates: list[Update] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.additions and not self.updates


def _version_database_name(definition: Entity, version: Entity) -> str:
    if version.name.lower() == "full":
        return definition.name
    return f"{definition.name}_{version.name}"


def discover(store: RegistryStore, machine: Entity,
             backend: Optional[NodeBackend]) -> ChangeSet:
    """Change set bringing the registry in line with the node's live state."""
    if backend is None:
        raise DiscoveryError(f"node {machine.name!r} is unreachable")
    try:
        live_databases = backend.databases()
        live_dirs = [str(d) for d in backend.data_dirs]
    except Exception as exc:
        raise DiscoveryError(f"node {machine.name!r} is unreachable: {exc}") from exc

    changes = ChangeSet(machine=machine.name)

    # disk volumes: every live data dir should be registered
    known_paths = {
        v.prop("path") for v in store.children(machine.id, EntityType.DISK_VOLUME)
    }
    for i, path in enumerate(live_dirs):
        if path not in known_paths:
            changes.additions.append(Addition(
                EntityType.DISK_VOLUME, f"vol{i}", machine.id,
                {"path": path, "flags": "data"}))

    # database instances: match live databases against known versions
    versions: dict[str, tuple[Entity, Entity]] = {}
    for definition in store.find_by_type(EntityType.DATABASE_DEFINITION):
        for version in store.children(definition.id, EntityType.DATABASE_VERSION):
            versions[_version_database_name(definition, version).lower()] = (
                definition, version)

    for db_name in live_databases:
        match = versions.get(db_name.lower())
        if match is None:
            continue  # private databases (mydb, tempdb, ...) are not discovered
        definition, version = match
        instance = _instance_on_machine(store, version, machine)
        live_counts = {
            f"rowcount.{t.name}": str(backend.table_row_count(db_name, t.name))
            for t in backend.introspect_database(db_name)
        }
        if instance is None:
            props = {"machine": machine.name, "database": db_name}
            props.update(live_counts)
            changes.additions.append(Addition(
                EntityType.DATABASE_INSTANCE, machine.name, version.id, props))
        else:
            stale = {
                k: v for k, v in live_counts.items()
                if instance.prop(k) != v
            }
            if stale:
                merged = dict(instance.properties)
                merged.update(stale)
                changes.updates.append(Update(instance.id, instance.name, merged))
    return changes


def _instance_on_machine(store: RegistryStore, version: Entity,
                         machine: Entity) -> Optional[Entity]:
    for instance in store.children(version.id, EntityType.DATABASE_INSTANCE):
        if instance.prop("machine") == machine.name:
            return instance
    return None


def apply_changes(store: RegistryStore, changes: ChangeSet) -> int:
    """Apply a change set; returns the number of entities touched."""
    touched = 0
    for add in changes.additions:
        store.create_entity(add.type, add.name, add.parent_id, add.properties)
        touched += 1
    for update in changes.updates:
        current = store.get_entity(update.entity_id)
        store.update_entity(current.id, current.version, properties=update.properties)
        touched += 1
    return touched
