"""Registry XML export, import, and merge.

Canonical form is byte-exact: UTF-8, two-space indentation, attributes in
id/type/name order, properties sorted by name before child entities, and
children sorted by (type, name).  Exports with no intervening writes are
therefore byte-identical.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from typing import Optional
from xml.sax.saxutils import escape, quoteattr

from .model import Entity, EntityType
from .store import RegistryStore

FORMAT_VERSION = "1"


class ImportError_(Exception):
    pass


def export_xml(store: RegistryStore, root_id: Optional[str] = None) -> bytes:
    """Serialize a branch (or the whole registry) to canonical XML."""
    if root_id is None:
        roots = store.roots()
    else:
        roots = [store.get_entity(root_id)]
    lines = ['<?xml version="1.0" encoding="UTF-8"?>',
             f'<registry format-version="{FORMAT_VERSION}">']
    for root in sorted(roots, key=lambda e: (e.type.value, e.name)):
        _write_entity(store, root, lines, depth=1)
    lines.append("</registry>")
    return ("\n".join(lines) + "\n").encode("utf-8")


def _write_entity(store: RegistryStore, entity: Entity, lines: list[str], depth: int) -> None:
    pad = "  " * depth
    head = (f'{pad}<entity id={quoteattr(entity.id)} '
            f'type={quoteattr(entity.type.value)} name={quoteattr(entity.name)}')
    children = store.children(entity.id)
    if not entity.properties and not children:
        lines.append(head + " />")
        return
    lines.append(head + ">")
    inner = "  " * (depth + 1)
    for key in sorted(entity.properties):
        value = escape(entity.properties[key])
        lines.append(f"{inner}<property name={quoteattr(key)}>{value}</property>")
    for child in sorted(children, key=lambda e: (e.type.value, e.name)):
        _write_entity(store, child, lines, depth + 1)
    lines.append(f"{pad}</entity>")


def import_xml(store: RegistryStore, document: bytes | str, merge: bool = False) -> dict:
    """Load a registry document; returns {'created': n, 'updated': n}.

    Plain import recreates the branch with ids preserved.  Merge matches on
    (parent path, type, name): matched entities get the document's
    properties folded in, new entities are created, absent ones untouched.
    """
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    try:
        root = ET.fromstring(document)
    except ET.ParseError as exc:
        raise ImportError_(f"malformed registry document: {exc}") from exc
    if root.tag != "registry":
        raise ImportError_(f"unexpected document root {root.tag!r}")

    stats = {"created": 0, "updated": 0}
    for element in root:
        _import_entity(store, element, parent=None, merge=merge, stats=stats)
    return stats


def _import_entity(store: RegistryStore, element, parent: Optional[Entity],
                   merge: bool, stats: dict) -> None:
    if element.tag != "entity":
        raise ImportError_(f"unexpected element {element.tag!r}")
    try:
        etype = EntityType(element.attrib["type"])
    except (KeyError, ValueError) as exc:
        raise ImportError_(f"bad entity type in document: {exc}") from exc
    name = element.attrib.get("name")
    if not name:
        raise ImportError_("entity element without a name attribute")
    entity_id = element.attrib.get("id")

    properties = {}
    children = []
    for child in element:
        if child.tag == "property":
            properties[child.attrib["name"]] = child.text or ""
        elif child.tag == "entity":
            children.append(child)
        else:
            raise ImportError_(f"unexpected element {child.tag!r} inside entity")

    parent_id = parent.id if parent is not None else None
    existing = store.child_by_name(parent_id, name, etype) if merge else None

    if existing is not None:
        if _props_subsumed(properties, existing.properties):
            entity = existing  # identical: no version churn
        else:
            merged = dict(existing.properties)
            merged.update(properties)
            entity = store.update_entity(existing.id, existing.version, properties=merged)
            stats["updated"] += 1
    else:
        entity = store.create_entity(etype, name, parent_id, properties,
                                     entity_id=entity_id if not merge else None)
        stats["created"] += 1

    for child in children:
        _import_entity(store, child, entity, merge, stats)


def _props_subsumed(new: dict, existing: dict) -> bool:
    return all(existing.get(k) == v for k, v in new.items())
