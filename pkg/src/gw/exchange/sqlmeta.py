"""Metadata interleaved with SQL DDL scripts.

Blocks of ``--/``-prefixed lines hold XML fragments; their position in the
script decides the object they describe: the next CREATE TABLE header for
table-level blocks, the next column definition line for column-level ones.
Recognized elements: <summary> (description), <unit>, <content> (content
identifier).
"""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Optional
from xml.sax.saxutils import escape, quoteattr

from ..schema.catalog import Catalog, UnknownObjectError
from ..schema.model import Metadata

COMMENT_PREFIX = "--/"

_CREATE_RE = re.compile(r"^\s*CREATE\s+TABLE\s+(?P<name>\"[^\"]+\"|\[[^\]]+\]|\w+)",
                        re.IGNORECASE)
_COLUMN_RE = re.compile(r"^\s*(?P<name>\"[^\"]+\"|\[[^\]]+\]|\w+)\s+\w+")
_TERMINATORS = {")", ");"}


class MetadataScriptError(Exception):
    def __init__(self, message: str, line: int):
        super().__init__(f"{message} (line {line})")
        self.line = line


@dataclass
class MetadataDoc:
    entries: dict[str, Metadata] = field(default_factory=dict)

    def to_xml(self) -> bytes:
        lines = ['<?xml version="1.0" encoding="UTF-8"?>', "<metadata>"]
        for path in sorted(self.entries):
            md = self.entries[path]
            lines.append(f"  <object path={quoteattr(path)}>")
            if md.description:
                lines.append(f"    <summary>{escape(md.description)}</summary>")
            if md.unit:
                lines.append(f"    <unit>{escape(md.unit)}</unit>")
            if md.content_id:
                lines.append(f"    <content>{escape(md.content_id)}</content>")
            lines.append("  </object>")
        lines.append("</metadata>")
        return ("\n".join(lines) + "\n").encode("utf-8")

    @classmethod
    def from_xml(cls, document: bytes | str) -> "MetadataDoc":
        root = ET.fromstring(document)
        doc = cls()
        for obj in root.findall("object"):
            doc.entries[obj.attrib["path"]] = Metadata(
                content_id=(obj.findtext("content") or ""),
                unit=(obj.findtext("unit") or ""),
                description=(obj.findtext("summary") or ""),
            )
        return doc


def _unquote(name: str) -> str:
    if name.startswith('"') or name.startswith("["):
        return name[1:-1]
    return name


def extract_metadata(script: str) -> MetadataDoc:
    """Scan a DDL script and associate ``--/`` XML comment blocks with the
    objects that follow them."""
    doc = MetadataDoc()
    pending: list[tuple[int, list[str]]] = []  # blocks waiting for an object
    block: Optional[tuple[int, list[str]]] = None
    current_table: Optional[str] = None
    in_columns = False

    for lineno, raw in enumerate(script.splitlines(), start=1):
        stripped = raw.strip()

        if stripped.startswith(COMMENT_PREFIX):
            text = stripped[len(COMMENT_PREFIX):].strip()
            if block is None:
                block = (lineno, [text])
            else:
                block[1].append(text)
            continue
        if block is not None:
            pending.append(block)
            block = None
        if not stripped:
            continue

        created = _CREATE_RE.match(raw)
        if created:
            current_table = _unquote(created.group("name"))
            in_columns = "(" in raw
            _attach(doc, pending, current_table)
            continue

        if current_table and not in_columns and stripped.startswith("("):
            in_columns = True
            rest = stripped[1:].strip()
            if rest:
                _maybe_column(doc, pending, current_table, rest)
            continue

        if current_table and in_columns:
            if stripped in _TERMINATORS or stripped.startswith(")"):
                in_columns = False
                current_table = None
                continue
            _maybe_column(doc, pending, current_table, stripped)
            continue

        # other statements: pending blocks stay pending until the next object

    if block is not None:
        pending.append(block)
    for lineno, _ in pending:
        # orphan block: no following object
        import logging
        logging.getLogger(__name__).warning(
            "metadata block at line %d has no following object; dropped", lineno)
    return doc


def _maybe_column(doc: MetadataDoc, pending, table: str, line_text: str) -> None:
    m = _COLUMN_RE.match(line_text)
    if m is None:
        return
    word = _unquote(m.group("name"))
    if word.upper() in ("PRIMARY", "FOREIGN", "UNIQUE", "CHECK", "CONSTRAINT"):
        return
    _attach(doc, pending, f"{table}.{word}")


def _attach(doc: MetadataDoc, pending: list, path: str) -> None:
    if not pending:
        return
    merged = doc.entries.get(path, Metadata())
    content, unit, summary = merged.content_id, merged.unit, merged.description
    for lineno, lines in pending:
        fragment = "\n".join(lines)
        try:
            root = ET.fromstring(f"<block>{fragment}</block>")
        except ET.ParseError as exc:
            raise MetadataScriptError(f"malformed XML comment: {exc}", lineno) from exc
        for el in root:
            text = (el.text or "").strip()
            if el.tag == "summary":
                summary = text
            elif el.tag == "unit":
                unit = text
            elif el.tag == "content":
                content = text
    pending.clear()
    doc.entries[path] = Metadata(content_id=content, unit=unit, description=summary)


def apply_metadata(doc: MetadataDoc, catalog: Catalog,
                   dataset_name: str) -> list[tuple[str, str]]:
    """Write the doc's entries into the catalog's metadata store.

    Idempotent; unknown object paths are reported while valid entries still
    apply.  Returns [(path, error)] for the failures.
    """
    errors: list[tuple[str, str]] = []
    for path in sorted(doc.entries):
        md = doc.entries[path]
        try:
            if catalog.get_metadata(dataset_name, path) == md:
                continue
            catalog.set_metadata(dataset_name, path, md)
        except UnknownObjectError as exc:
            errors.append((path, str(exc)))
    return errors
