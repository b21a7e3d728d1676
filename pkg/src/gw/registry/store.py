"""Transactional registry store.

A single embedded sqlite database on the controller holds every entity;
writes serialize per entity through optimistic version checks, reads see
consistent snapshots.  The same database file also hosts the job-system
tables (log, ledger) so one path covers all controller persistence.
"""

from __future__ import annotations

import datetime as dt
import json
import sqlite3
import threading
import uuid
from pathlib import Path
from typing import Iterable, Optional

from .model import CONTAINMENT, Entity, EntityType


class RegistryError(Exception):
    pass


class DuplicateNameError(RegistryError):
    pass


class MissingParentError(RegistryError):
    pass


class VersionConflictError(RegistryError):
    pass


class HasChildrenError(RegistryError):
    pass


class ContainmentViolationError(RegistryError):
    pass


class UnknownEntityError(RegistryError):
    pass


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


class RegistryStore:
    def __init__(self, path: Path | str):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()
        bootstrap = sqlite3.connect(self.path)
        bootstrap.execute("PRAGMA journal_mode=WAL")
        bootstrap.close()
        conn = self._connect()
        try:
            conn.executescript(
                """
                CREATE TABLE IF NOT EXISTS entities (
                    id TEXT PRIMARY KEY,
                    type TEXT NOT NULL,
                    name TEXT NOT NULL,
                    parent TEXT NOT NULL DEFAULT '',
                    version INTEGER NOT NULL,
                    created TEXT NOT NULL,
                    modified TEXT NOT NULL,
                    properties TEXT NOT NULL
                );
                CREATE UNIQUE INDEX IF NOT EXISTS ux_entities_path
                    ON entities(parent, type, name);
                CREATE INDEX IF NOT EXISTS ix_entities_parent ON entities(parent);
                """
            )
            conn.commit()
        finally:
            conn.close()

    def _connect(self) -> sqlite3.Connection:
        # WAL is set once at init (it is a persistent database property)
        conn = sqlite3.connect(self.path, timeout=30, check_same_thread=False)
        conn.execute("PRAGMA busy_timeout=30000")
        return conn

    # -- CRUD -------------------------------------------------------------

    def create_entity(
        self,
        type: EntityType,
        name: str,
        parent: Optional[str] = None,
        properties: Optional[dict[str, str]] = None,
        entity_id: Optional[str] = None,
    ) -> Entity:
        entity = Entity(
            id=entity_id or uuid.uuid4().hex,
            type=type,
            name=name,
            parent=parent,
            properties=dict(properties or {}),
            version=1,
            created=_now(),
            modified=_now(),
        )
        with self._lock:
            conn = self._connect()
            try:
                self._validate_placement(conn, entity)
                self._insert(conn, entity)
                conn.commit()
            finally:
                conn.close()
        return entity

    def _validate_placement(self, conn, entity: Entity) -> None:
        allowed = CONTAINMENT[entity.type]
        if entity.parent is None:
            if allowed:
                raise ContainmentViolationError(
                    f"{entity.type.value} cannot be a root entity")
            return
        row = conn.execute("SELECT type FROM entities WHERE id = ?",
                           (entity.parent,)).fetchone()
        if row is None:
            raise MissingParentError(f"parent {entity.parent!r} does not exist")
        parent_type = EntityType(row[0])
        if parent_type not in allowed:
            raise ContainmentViolationError(
                f"{entity.type.value} cannot live under {parent_type.value}")

    def _insert(self, conn, entity: Entity) -> None:
        try:
            conn.execute(
                "INSERT INTO entities (id, type, name, parent, version, created, "
                "modified, properties) VALUES (?, ?, ?, ?, ?, ?, ?, ?)",
                (entity.id, entity.type.value, entity.name, entity.parent or "",
                 entity.version, entity.created, entity.modified,
                 json.dumps(entity.properties, sort_keys=True)),
            )
        except sqlite3.IntegrityError as exc:
            raise DuplicateNameError(
                f"{entity.type.value} {entity.name!r} already exists "
                f"under this parent") from exc

    def get_entity(self, entity_id: str) -> Entity:
        conn = self._connect()
        try:
            row = conn.execute(
                "SELECT id, type, name, parent, version, created, modified, "
                "properties FROM entities WHERE id = ?", (entity_id,)).fetchone()
        finally:
            conn.close()
        if row is None:
            raise UnknownEntityError(f"no entity with id {entity_id!r}")
        return self._entity(row)

    def _entity(self, row) -> Entity:
        return Entity(
            id=row[0], type=EntityType(row[1]), name=row[2],
            parent=row[3] or None, version=row[4], created=row[5],
            modified=row[6], properties=json.loads(row[7]))

    def update_entity(self, entity_id: str, expected_version: int,
                      properties: Optional[dict[str, str]] = None,
                      name: Optional[str] = None) -> Entity:
        with self._lock:
            conn = self._connect()
            try:
                current = conn.execute(
                    "SELECT id, type, name, parent, version, created, modified, "
                    "properties FROM entities WHERE id = ?", (entity_id,)).fetchone()
                if current is None:
                    raise UnknownEntityError(f"no entity with id {entity_id!r}")
                entity = self._entity(current)
                new_name = name if name is not None else entity.name
                new_props = dict(properties) if properties is not None else entity.properties
                cur = conn.execute(
                    "UPDATE entities SET name = ?, properties = ?, version = version + 1, "
                    "modified = ? WHERE id = ? AND version = ?",
                    (new_name, json.dumps(new_props, sort_keys=True), _now(),
                     entity_id, expected_version))
                if cur.rowcount == 0:
                    raise VersionConflictError(
                        f"entity {entity.name!r} was modified concurrently "
                        f"(expected v{expected_version})")
                conn.commit()
            finally:
                conn.close()
        return self.get_entity(entity_id)

    def delete_entity(self, entity_id: str, expected_version: int) -> None:
        with self._lock:
            conn = self._connect()
            try:
                children = conn.execute(
                    "SELECT COUNT(*) FROM entities WHERE parent = ?",
                    (entity_id,)).fetchone()[0]
                if children:
                    raise HasChildrenError(
                        f"entity {entity_id!r} still has {children} children")
                cur = conn.execute(
                    "DELETE FROM entities WHERE id = ? AND version = ?",
                    (entity_id, expected_version))
                if cur.rowcount == 0:
                    if conn.execute("SELECT 1 FROM entities WHERE id = ?",
                                    (entity_id,)).fetchone() is None:
                        raise UnknownEntityError(f"no entity with id {entity_id!r}")
                    raise VersionConflictError(
                        f"entity {entity_id!r} was modified concurrently")
                conn.commit()
            finally:
                conn.close()

    # -- navigation -------------------------------------------------------------

    def children(self, parent_id: Optional[str],
                 type: Optional[EntityType] = None) -> list[Entity]:
        conn = self._connect()
        try:
            if type is None:
                rows = conn.execute(
                    "SELECT id, type, name, parent, version, created, modified, "
                    "properties FROM entities WHERE parent = ? ORDER BY type, name",
                    (parent_id or "",)).fetchall()
            else:
                rows = conn.execute(
                    "SELECT id, type, name, parent, version, created, modified, "
                    "properties FROM entities WHERE parent = ? AND type = ? "
                    "ORDER BY name", (parent_id or "", type.value)).fetchall()
            return [self._entity(r) for r in rows]
        finally:
            conn.close()

    def roots(self) -> list[Entity]:
        return self.children(None)

    def find_by_type(self, type: EntityType) -> list[Entity]:
        conn = self._connect()
        try:
            rows = conn.execute(
                "SELECT id, type, name, parent, version, created, modified, "
                "properties FROM entities WHERE type = ? ORDER BY name",
                (type.value,)).fetchall()
            return [self._entity(r) for r in rows]
        finally:
            conn.close()

    def get_by_path(self, path: str) -> Entity:
        """Look up an entity by slash-separated names from a root."""
        parts = [p for p in path.split("/") if p]
        if not parts:
            raise UnknownEntityError("empty path")
        scope = self.roots()
        entity = None
        for part in parts:
            entity = next((e for e in scope if e.name.lower() == part.lower()), None)
            if entity is None:
                raise UnknownEntityError(f"path {path!r} not found at {part!r}")
            scope = self.children(entity.id)
        return entity

    def child_by_name(self, parent_id: str, name: str,
                      type: Optional[EntityType] = None) -> Optional[Entity]:
        for child in self.children(parent_id, type):
            if child.name.lower() == name.lower():
                return child
        return None

    def subtree(self, root_id: str) -> list[Entity]:
        """The branch rooted at ``root_id``, parents before children."""
        root = self.get_entity(root_id)
        out = [root]
        queue = [root]
        while queue:
            current = queue.pop(0)
            kids = self.children(current.id)
            out.extend(kids)
            queue.extend(kids)
        return out

    def all_entities(self) -> list[Entity]:
        conn = self._connect()
        try:
            rows = conn.execute(
                "SELECT id, type, name, parent, version, created, modified, "
                "properties FROM entities ORDER BY type, name").fetchall()
            return [self._entity(r) for r in rows]
        finally:
            conn.close()

    def verify_referential_integrity(self) -> list[str]:
        """Full-scan check: every non-root parent reference must resolve."""
        problems = []
        entities = {e.id: e for e in self.all_entities()}
        for e in entities.values():
            if e.parent is not None and e.parent not in entities:
                problems.append(f"{e.type.value} {e.name!r} references missing "
                                f"parent {e.parent!r}")
            machine = e.properties.get("machine")
            if machine and e.type is EntityType.DATABASE_INSTANCE:
                if not any(x.type is EntityType.MACHINE and x.name == machine
                           for x in entities.values()):
                    problems.append(f"instance {e.name!r} references missing "
                                    f"machine {machine!r}")
        return problems


def create_many(store: RegistryStore, specs: Iterable[tuple]) -> dict[str, Entity]:
    """Convenience loader: specs of (type, name, parent-key or None, props);
    returns created entities keyed by name."""
    created: dict[str, Entity] = {}
    for type_, name, parent_key, props in specs:
        parent_id = created[parent_key].id if parent_key else None
        created[name] = store.create_entity(type_, name, parent_id, props)
    return created
