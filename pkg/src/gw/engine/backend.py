"""Per-node embedded relational backends.

Each simulated cluster node hosts a set of sqlite databases (one file per
database, placed on the node's data volumes).  Statements arrive as parse
trees and are rendered in an engine-compatible form derived from the
node's dialect; multi-database queries attach the referenced databases
under their dataset names.
"""

from __future__ import annotations

import datetime as dt
import re
import sqlite3
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Sequence

from ..schema.model import ColumnSchema, Dataset, DataType, TableSchema
from ..sql.ast import NodeKind, SyntaxNode, find_nodes, name_leaf, table_ref_parts
from ..sql.dialect import DialectRules, RowLimitStyle, get_dialect
from ..sql.render import render, render_identifier
from .values import format_timestamp, parse_timestamp

DEFAULT_BATCH_SIZE = 4096

_SQL_TYPE = {
    DataType.INTEGER: "INTEGER",
    DataType.FLOAT: "REAL",
    DataType.TEXT: "TEXT",
    DataType.BOOLEAN: "BOOLEAN",
    DataType.TIMESTAMP: "TIMESTAMP",
}

_TYPE_FROM_DECL = {
    "INTEGER": DataType.INTEGER, "INT": DataType.INTEGER, "BIGINT": DataType.INTEGER,
    "REAL": DataType.FLOAT, "FLOAT": DataType.FLOAT, "DOUBLE": DataType.FLOAT,
    "TEXT": DataType.TEXT, "VARCHAR": DataType.TEXT, "CHAR": DataType.TEXT,
    "BOOLEAN": DataType.BOOLEAN, "BOOL": DataType.BOOLEAN,
    "TIMESTAMP": DataType.TIMESTAMP, "DATETIME": DataType.TIMESTAMP,
}


class EngineError(Exception):
    """Engine failure carrying the node id and the offending statement."""

    def __init__(self, node_id: str, message: str, statement: str = ""):
        detail = f"[node {node_id}] {message}"
        if statement:
            detail += f" (statement: {statement})"
        super().__init__(detail)
        self.node_id = node_id
        self.statement = statement


@dataclass
class RowBatch:
    columns: list[ColumnSchema]
    rows: list[tuple]

    def __len__(self) -> int:
        return len(self.rows)


def _engine_dialect(declared: DialectRules) -> DialectRules:
    # sqlite keeps the declared quoting (it accepts both [x] and "x") but
    # only understands LIMIT and dot-separated database qualifiers.
    return DialectRules(
        name=f"{declared.name}-engine",
        quote_open=declared.quote_open,
        quote_close=declared.quote_close,
        row_limit=RowLimitStyle.SUFFIX_LIMIT,
        boolean_true="1",
        boolean_false="0",
        dataset_separator=".",
    )


def to_storage(value, data_type: DataType):
    if value is None:
        return None
    if data_type is DataType.BOOLEAN:
        return 1 if value else 0
    if data_type is DataType.TIMESTAMP:
        if isinstance(value, dt.datetime):
            return format_timestamp(value)
        return format_timestamp(parse_timestamp(str(value)))
    return value


def from_storage(value, data_type: DataType):
    if value is None:
        return None
    if data_type is DataType.BOOLEAN:
        return bool(value)
    if data_type is DataType.TIMESTAMP:
        return parse_timestamp(str(value))
    if data_type is DataType.FLOAT and isinstance(value, int):
        return float(value)
    return value


class NodeBackend:
    """One simulated cluster node: sqlite databases on local volume dirs."""

    def __init__(self, node_id: str, data_dirs: Sequence[Path | str],
                 dialect_name: str = "base"):
        if not data_dirs:
            raise ValueError("a node needs at least one data volume directory")
        self.node_id = node_id
        self.data_dirs = [Path(d) for d in data_dirs]
        for d in self.data_dirs:
            d.mkdir(parents=True, exist_ok=True)
        self.dialect_name = dialect_name
        self._dialect = get_dialect(dialect_name)
        self._engine_dialect = _engine_dialect(self._dialect)
        self._databases: dict[str, Path] = {}
        self._lock = threading.RLock()
        self._next_dir = 0
        for d in self.data_dirs:
            for f in sorted(d.glob("*.sqlite")):
                self._databases[f.stem.lower()] = f

    # -- database lifecycle --------------------------------------------------

    def databases(self) -> list[str]:
        return sorted(self._databases)

    def has_database(self, name: str) -> bool:
        return name.lower() in self._databases

    def create_database(self, name: str) -> Path:
        with self._lock:
            key = name.lower()
            if key in self._databases:
                raise EngineError(self.node_id, f"database {name!r} already exists")
            directory = self.data_dirs[self._next_dir % len(self.data_dirs)]
            self._next_dir += 1
            path = directory / f"{key}.sqlite"
            conn = sqlite3.connect(path)
            conn.execute("PRAGMA journal_mode=WAL")
            conn.close()
            self._databases[key] = path
            return path

    def ensure_database(self, name: str) -> Path:
        with self._lock:
            if not self.has_database(name):
                return self.create_database(name)
            return self._databases[name.lower()]

    def drop_database(self, name: str) -> None:
        with self._lock:
            key = name.lower()
            path = self._databases.pop(key, None)
            if path is not None:
                for suffix in ("", "-wal", "-shm"):
                    p = Path(str(path) + suffix)
                    if p.exists():
                        p.unlink()

    def connect(self, database: str) -> sqlite3.Connection:
        path = self._databases.get(database.lower())
        if path is None:
            raise EngineError(self.node_id, f"unknown database {database!r}")
        conn = sqlite3.connect(path, timeout=30, check_same_thread=False)
        conn.execute("PRAGMA busy_timeout=30000")
        conn.execute("PRAGMA foreign_keys=ON")
        return conn

    # -- DDL and scripts -----------------------------------------------------

    def run_script(self, database: str, script: str) -> None:
        conn = self.connect(database)
        try:
            conn.executescript(script)
            conn.commit()
        except sqlite3.Error as exc:
            raise EngineError(self.node_id, f"script failed: {exc}") from exc
        finally:
            conn.close()

    def create_table(self, database: str, schema: TableSchema) -> None:
        cols = []
        for c in schema.columns:
            decl = f"{self._quote(c.name)} {_SQL_TYPE[c.data_type]}"
            if not c.nullable:
                decl += " NOT NULL"
            cols.append(decl)
        sql = f"CREATE TABLE {self._quote(schema.name)} ({', '.join(cols)})"
        self._execute_raw(database, sql)

    def drop_table(self, database: str, table: str) -> None:
        self._execute_raw(database, f"DROP TABLE IF EXISTS {self._quote(table)}")

    def create_index(self, database: str, table: str, columns: Sequence[str]) -> None:
        if not columns:
            return
        name = f"ix_{table}_{'_'.join(columns)}"
        name = re.sub(r"\W+", "_", name)
        cols = ", ".join(self._quote(c) for c in columns)
        self._execute_raw(
            database,
            f"CREATE INDEX IF NOT EXISTS {self._quote(name)} "
            f"ON {self._quote(table)} ({cols})")

    def insert_rows(self, database: str, schema: TableSchema, rows: list[tuple],
                    conn: Optional[sqlite3.Connection] = None) -> None:
        placeholders = ", ".join("?" for _ in schema.columns)
        cols = ", ".join(self._quote(c.name) for c in schema.columns)
        sql = (f"INSERT INTO {self._quote(schema.name)} ({cols}) "
               f"VALUES ({placeholders})")
        converted = [
            tuple(to_storage(v, c.data_type) for v, c in zip(row, schema.columns))
            for row in rows
        ]
        if conn is not None:
            conn.executemany(sql, converted)
            return
        own = self.connect(database)
        try:
            own.executemany(sql, converted)
            own.commit()
        finally:
            own.close()

    def table_row_count(self, database: str, table: str) -> int:
        conn = self.connect(database)
        try:
            cur = conn.execute(f"SELECT COUNT(*) FROM {self._quote(table)}")
            return cur.fetchone()[0]
        finally:
            conn.close()

    # -- statements ------------------------------------------------------------

    def run_statement(
        self,
        database: str,
        statement: SyntaxNode,
        expected_schema: Optional[list[ColumnSchema]] = None,
        batch_size: int = DEFAULT_BATCH_SIZE,
    ) -> tuple[list[ColumnSchema], Iterator[RowBatch]]:
        """Render the tree in the node's dialect and stream result batches."""
        text = render(statement, self._engine_dialect)
        datasets = {
            table_ref_parts(ref)[0]
            for ref in find_nodes(statement, NodeKind.TABLE_REF)
            if table_ref_parts(ref)[0] is not None
        }
        conn = self.connect(database)
        try:
            for ds in sorted(datasets):
                path = self._databases.get(ds.lower())
                if path is None:
                    raise EngineError(self.node_id, f"unknown database {ds!r}", text)
                conn.execute(f"ATTACH DATABASE ? AS {self._quote(ds)}", (str(path),))
            try:
                cur = conn.execute(text)
            except sqlite3.Error as exc:
                raise EngineError(self.node_id, str(exc), text) from exc
            columns = self._result_columns(cur, expected_schema)
            return columns, self._batches(conn, cur, columns, batch_size)
        except Exception:
            conn.close()
            raise

    def run_sql_text(self, database: str, text: str,
                     batch_size: int = DEFAULT_BATCH_SIZE,
                     expected_schema: Optional[list[ColumnSchema]] = None,
                     ) -> tuple[list[ColumnSchema], Iterator[RowBatch]]:
        """Execute already-rendered engine-compatible SQL text."""
        conn = self.connect(database)
        try:
            cur = conn.execute(text)
        except sqlite3.Error as exc:
            conn.close()
            raise EngineError(self.node_id, str(exc), text) from exc
        columns = self._result_columns(cur, expected_schema)
        return columns, self._batches(conn, cur, columns, batch_size)

    def _result_columns(self, cur, expected: Optional[list[ColumnSchema]]):
        if expected is not None:
            return expected
        names = [d[0] for d in cur.description] if cur.description else []
        return [ColumnSchema(n, DataType.TEXT) for n in names]

    def _batches(self, conn, cur, columns, batch_size) -> Iterator[RowBatch]:
        try:
            while True:
                chunk = cur.fetchmany(batch_size)
                if not chunk:
                    break
                rows = [
                    tuple(from_storage(v, c.data_type) for v, c in zip(row, columns))
                    for row in chunk
                ]
                yield RowBatch(columns, rows)
        finally:
            conn.close()

    def _execute_raw(self, database: str, sql: str) -> None:
        conn = self.connect(database)
        try:
            conn.execute(sql)
            conn.commit()
        except sqlite3.Error as exc:
            raise EngineError(self.node_id, str(exc), sql) from exc
        finally:
            conn.close()

    def _quote(self, name: str) -> str:
        return render_identifier(name, self._engine_dialect)

    # -- schema introspection ----------------------------------------------------

    def list_tables(self, dataset: Dataset) -> list[TableSchema]:
        """SchemaProvider implementation: introspect the dataset's database."""
        return self.introspect_database(dataset.name)

    def introspect_database(self, database: str) -> list[TableSchema]:
        conn = self.connect(database)
        try:
            names = [
                r[0] for r in conn.execute(
                    "SELECT name FROM sqlite_master WHERE type='table' "
                    "AND name NOT LIKE 'sqlite_%' AND name NOT GLOB '_gw_*' "
                    "ORDER BY name")
            ]
            tables = []
            for name in names:
                cols = []
                for _, cname, decl, notnull, _, _ in conn.execute(
                        f"PRAGMA table_info({self._quote(name)})"):
                    base = (decl or "").split("(")[0].strip().upper()
                    dtype = _TYPE_FROM_DECL.get(base, DataType.TEXT)
                    cols.append(ColumnSchema(cname, dtype, nullable=not notnull))
                tables.append(TableSchema(name, cols))
            return tables
        finally:
            conn.close()


def qualify_table_refs(statement: SyntaxNode) -> SyntaxNode:
    """Copy with every unqualified table reference expanded via its binding.

    Execution happens outside any default-dataset context, so each table
    must name its dataset explicitly.
    """
    out = statement.clone()
    for source in find_nodes(out, NodeKind.TABLE_SOURCE):
        ref = source.children[0]
        if len(ref.children) == 1 and "binding" in source.annotations:
            dataset = source.annotations["binding"].dataset.name
            ref.children.insert(0, name_leaf(dataset))
    return out
