"""Catalog domain model: datasets, table schemas, column metadata."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional


class DatasetKind(Enum):
    LOCAL = "local"
    REMOTE = "remote"
    MYDB = "mydb"
    TEMPDB = "tempdb"
    MINI = "mini"


class DataType(Enum):
    INTEGER = "integer"
    FLOAT = "float"
    TEXT = "text"
    BOOLEAN = "boolean"
    TIMESTAMP = "timestamp"


@dataclass(frozen=True)
class Metadata:
    """Three-value schema metadata, stored and returned verbatim."""

    content_id: str = ""
    unit: str = ""
    description: str = ""

    @property
    def empty(self) -> bool:
        return not (self.content_id or self.unit or self.description)


EMPTY_METADATA = Metadata()


@dataclass
class ColumnSchema:
    name: str
    data_type: DataType
    nullable: bool = True
    metadata: Metadata = EMPTY_METADATA


@dataclass
class TableSchema:
    name: str
    columns: list[ColumnSchema] = field(default_factory=list)
    metadata: Metadata = EMPTY_METADATA

    def __post_init__(self):
        names = [c.name.lower() for c in self.columns]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate column names in table {self.name!r}")

    def column(self, name: str) -> Optional[ColumnSchema]:
        lowered = name.lower()
        for c in self.columns:
            if c.name.lower() == lowered:
                return c
        return None

    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]


@dataclass
class Dataset:
    """A named collection of tables: a federation database, a user's MyDB,
    a node's scratch space, or a sampled mini replica."""

    name: str
    kind: DatasetKind
    dialect_name: str = "base"
    location: str = ""  # node id, or remote endpoint for DatasetKind.REMOTE
    sample_fraction: float = 1.0
    parent: Optional[str] = None  # mini datasets reference their full parent

    def __post_init__(self):
        if not (0.0 < self.sample_fraction <= 1.0):
            raise ValueError("sample fraction must be in (0, 1]")
        if self.kind is not DatasetKind.MINI and self.sample_fraction != 1.0:
            raise ValueError("only mini datasets carry a sample fraction below 1")
        if self.kind is DatasetKind.MINI and self.parent is None:
            raise ValueError("mini datasets must reference a parent dataset")
