"""CSV table format: the bit-exact canonical form.

Writes UTF-8 with a header row, CRLF line ends, comma separators and
RFC 4180 quoting; NULL is an empty unquoted field, the empty string is a
quoted empty field, booleans are ``true``/``false``, timestamps RFC 3339.
The stdlib csv module cannot distinguish quoted from unquoted empty
fields, so reading is implemented here.
"""

from __future__ import annotations

import datetime as dt
import io
from typing import Iterator, Optional

from ..engine.values import format_timestamp, looks_like_timestamp, parse_timestamp
from ..schema.model import ColumnSchema, DataType, TableSchema


class CsvError(Exception):
    """Malformed CSV; carries the 1-based line number when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(f"{message} (line {line})" if line else message)
        self.line = line


class HeaderMismatchError(CsvError):
    pass


# -- writing -------------------------------------------------------------

def _format_field(value, data_type: DataType) -> str:
    if value is None:
        return ""
    if data_type is DataType.BOOLEAN:
        text = "true" if value else "false"
    elif data_type is DataType.TIMESTAMP:
        text = format_timestamp(value) if isinstance(value, dt.datetime) else str(value)
    elif data_type is DataType.FLOAT:
        text = repr(float(value))
    else:
        text = str(value)
    if text == "" or any(ch in text for ch in ',"\r\n'):
        return '"' + text.replace('"', '""') + '"'
    return text


def write_header(columns: list[ColumnSchema]) -> bytes:
    cells = []
    for c in columns:
        name = c.name
        if name == "" or any(ch in name for ch in ',"\r\n'):
            name = '"' + name.replace('"', '""') + '"'
        cells.append(name)
    return (",".join(cells) + "\r\n").encode("utf-8")


def write_row(row: tuple, columns: list[ColumnSchema]) -> bytes:
    cells = [_format_field(v, c.data_type) for v, c in zip(row, columns)]
    return (",".join(cells) + "\r\n").encode("utf-8")


def write_table(columns: list[ColumnSchema], rows) -> Iterator[bytes]:
    yield write_header(columns)
    for row in rows:
        yield write_row(row, columns)


# -- reading -------------------------------------------------------------

class _Field:
    __slots__ = ("text", "quoted")

    def __init__(self, text: str, quoted: bool):
        self.text = text
        self.quoted = quoted


def _parse_records(text: str) -> Iterator[tuple[int, list[_Field]]]:
    """RFC 4180 records with quoting information kept per field."""
    fields: list[_Field] = []
    buf: list[str] = []
    quoted = False
    in_quotes = False
    line = 1
    record_line = 1
    i = 0
    n = len(text)
    any_content = False

    def flush_field():
        nonlocal buf, quoted
        fields.append(_Field("".join(buf), quoted))
        buf = []
        quoted = False

    while i < n:
        ch = text[i]
        if in_quotes:
            if ch == '"':
                if i + 1 < n and text[i + 1] == '"':
                    buf.append('"')
                    i += 2
                    continue
                in_quotes = False
                i += 1
                continue
            if ch == "\n":
                line += 1
            buf.append(ch)
            i += 1
            continue
        if ch == '"':
            if buf:
                raise CsvError("quote inside unquoted field", line)
            in_quotes = True
            quoted = True
            any_content = True
            i += 1
            continue
        if ch == ",":
            flush_field()
            any_content = True
            i += 1
            continue
        if ch == "\r" or ch == "\n":
            if ch == "\r" and i + 1 < n and text[i + 1] == "\n":
                i += 2
            else:
                i += 1
            if any_content or buf or fields:
                flush_field()
                yield record_line, fields
                fields = []
            line += 1
            record_line = line
            any_content = False
            continue
        buf.append(ch)
        any_content = True
        i += 1

    if in_quotes:
        raise CsvError("unterminated quoted field", record_line)
    if any_content or buf or fields:
        flush_field()
        yield record_line, fields


_BOOLEANS = {"true": True, "false": False}


def infer_schema(header: list[str], records: list[list[_Field]],
                 table_name: str) -> TableSchema:
    """Deterministic inference: integer, else float, else boolean, else
    RFC 3339 timestamp, else text; empty unquoted fields are NULL and do
    not vote."""
    columns = []
    for idx, name in enumerate(header):
        cells = [
            r[idx] for r in records
            if idx < len(r) and not (r[idx].text == "" and not r[idx].quoted)
        ]
        columns.append(ColumnSchema(name, _infer_type(cells)))
    return TableSchema(table_name, columns)


def _infer_type(cells: list[_Field]) -> DataType:
    if not cells:
        return DataType.TEXT
    texts = [c.text for c in cells]
    if all(_is_int(t) for t in texts):
        return DataType.INTEGER
    if all(_is_float(t) for t in texts):
        return DataType.FLOAT
    if all(t in _BOOLEANS for t in texts):
        return DataType.BOOLEAN
    if all(looks_like_timestamp(t) for t in texts):
        return DataType.TIMESTAMP
    return DataType.TEXT


def _is_int(text: str) -> bool:
    try:
        int(text)
        return True
    except ValueError:
        return False


def _is_float(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def _convert(field: _Field, data_type: DataType, line: int):
    if field.text == "" and not field.quoted:
        return None
    t = field.text
    try:
        if data_type is DataType.INTEGER:
            return int(t)
        if data_type is DataType.FLOAT:
            return float(t)
        if data_type is DataType.BOOLEAN:
            return _BOOLEANS[t]
        if data_type is DataType.TIMESTAMP:
            return parse_timestamp(t)
        return t
    except (ValueError, KeyError) as exc:
        raise CsvError(f"cannot read {t!r} as {data_type.value}: {exc}", line)


def read_table(stream, table_name: str,
               schema: Optional[TableSchema] = None) -> tuple[TableSchema, list[tuple]]:
    """Parse a whole CSV document; header row is mandatory.

    Without a schema the column types are inferred from the data.
    """
    data = stream.read() if hasattr(stream, "read") else stream
    if isinstance(data, bytes):
        data = data.decode("utf-8")

    records = list(_parse_records(data))
    if not records:
        raise CsvError("missing header row", 1)
    header_line, header_fields = records[0]
    header = [f.text for f in header_fields]
    body = records[1:]

    for line, fields in body:
        if len(fields) != len(header):
            raise CsvError(
                f"row has {len(fields)} fields, header has {len(header)}", line)

    if schema is None:
        schema = infer_schema(header, [f for _, f in body], table_name)
    else:
        if [c.name.lower() for c in schema.columns] != [h.lower() for h in header]:
            raise HeaderMismatchError(
                "header does not match the destination schema", header_line)

    rows = [
        tuple(_convert(f, c.data_type, line)
              for f, c in zip(fields, schema.columns))
        for line, fields in body
    ]
    return TableSchema(table_name, schema.columns), rows
