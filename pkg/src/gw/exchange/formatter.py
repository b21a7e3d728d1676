"""Formatter plug-in contract and registry, plus table import/export."""

from __future__ import annotations

from typing import BinaryIO, Iterator, Optional, Protocol

from ..engine.backend import NodeBackend, RowBatch
from ..schema.model import TableSchema
from . import csvfmt
from .csvfmt import HeaderMismatchError


class UnknownFormatError(Exception):
    pass


class SchemaMismatchError(Exception):
    pass


class Formatter(Protocol):
    """A table file format: schema probing plus sequential row iteration."""

    name: str
    extension: str
    can_read: bool
    can_write: bool

    def read(self, stream: BinaryIO, table_name: str,
             schema: Optional[TableSchema] = None) -> tuple[TableSchema, list[tuple]]:
        ...

    def write(self, schema: TableSchema, batches: Iterator[RowBatch]) -> Iterator[bytes]:
        ...


class CsvFormatter:
    name = "csv"
    extension = ".csv"
    can_read = True
    can_write = True

    def read(self, stream, table_name, schema=None):
        return csvfmt.read_table(stream, table_name, schema)

    def write(self, schema, batches):
        yield csvfmt.write_header(schema.columns)
        for batch in batches:
            for row in batch.rows:
                yield csvfmt.write_row(row, schema.columns)


_FORMATTERS: dict[str, Formatter] = {}


def register_formatter(formatter: Formatter) -> None:
    _FORMATTERS[formatter.name.lower()] = formatter


def get_formatter(name: str) -> Formatter:
    try:
        return _FORMATTERS[name.lower()]
    except KeyError:
        raise UnknownFormatError(f"unknown format {name!r}") from None


def formats() -> list[str]:
    return sorted(_FORMATTERS)


register_formatter(CsvFormatter())


def import_file(
    stream: BinaryIO,
    format_name: str,
    backend: NodeBackend,
    database: str,
    table: str,
) -> int:
    """Load a file into a table: created from the probed schema when absent,
    appended when the existing schema matches."""
    formatter = get_formatter(format_name)
    if not formatter.can_read:
        raise UnknownFormatError(f"format {format_name!r} cannot read")

    existing = {t.name.lower(): t for t in backend.introspect_database(database)}
    target = existing.get(table.lower())

    try:
        schema, rows = formatter.read(stream, table, schema=target)
    except HeaderMismatchError as exc:
        raise SchemaMismatchError(str(exc)) from exc
    if target is None:
        backend.create_table(database, schema)
    else:
        mine = [(c.name.lower(), c.data_type) for c in target.columns]
        theirs = [(c.name.lower(), c.data_type) for c in schema.columns]
        if mine != theirs:
            raise SchemaMismatchError(
                f"table {table!r} exists with a different schema")
    try:
        if rows:
            backend.insert_rows(database, schema, rows)
    except Exception:
        if target is None:
            backend.drop_table(database, table)  # never leave a silent partial
        raise
    return len(rows)


def export_table(
    backend: NodeBackend,
    database: str,
    table: str,
    format_name: str,
    batch_size: int = 4096,
) -> Iterator[bytes]:
    """Stream a table in the requested format's canonical form."""
    formatter = get_formatter(format_name)
    if not formatter.can_write:
        raise UnknownFormatError(f"format {format_name!r} cannot write")
    schema = next(
        (t for t in backend.introspect_database(database)
         if t.name.lower() == table.lower()), None)
    if schema is None:
        raise LookupError(f"no table {table!r} in database {database!r}")
    _, batches = backend.run_sql_text(
        database, f"SELECT * FROM {backend._quote(table)}",
        batch_size=batch_size, expected_schema=schema.columns)
    return formatter.write(schema, batches)
