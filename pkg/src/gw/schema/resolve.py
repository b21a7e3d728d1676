"""Name resolution: bind every table and column reference to the catalog.

The resolver is a pure function of (tree, catalog snapshot).  Bindings are
attached as node annotations under the key ``"binding"``; a select-list
``*`` gets its expansion (all in-scope columns, FROM order) under
``"expansion"``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..sql.ast import (
    NodeKind,
    SyntaxNode,
    column_ref_parts,
    find_nodes,
    table_ref_parts,
    table_source_alias,
)
from .catalog import Catalog, UnknownDatasetError
from .model import ColumnSchema, Dataset, TableSchema


class ResolutionError(Exception):
    pass


class UnknownTableError(ResolutionError):
    pass


class UnknownColumnError(ResolutionError):
    pass


class AmbiguousColumnError(ResolutionError):
    pass


class DuplicateAliasError(ResolutionError):
    pass


@dataclass(eq=False)
class TableBinding:
    dataset: Dataset
    table: TableSchema
    alias: Optional[str]
    source: SyntaxNode

    @property
    def effective_name(self) -> str:
        return self.alias if self.alias is not None else self.table.name

    @property
    def qualified_name(self) -> tuple[str, str]:
        return (self.dataset.name, self.table.name)

    def __repr__(self) -> str:
        return f"<{self.dataset.name}:{self.table.name} as {self.effective_name}>"


@dataclass(eq=False)
class ColumnBinding:
    table: TableBinding
    column: ColumnSchema

    def __repr__(self) -> str:
        return f"<{self.table!r}.{self.column.name}>"


@dataclass
class ResolvedQuery:
    root: SyntaxNode
    tables: list[TableBinding]
    partition: Optional[ColumnBinding]
    catalog_version: int
    default_dataset: Optional[Dataset]
    user: Optional[str] = None
    star_expansion: list[ColumnBinding] = field(default_factory=list)
    dataset_versions: dict[str, int] = field(default_factory=dict)

    def binding_for_source(self, source: SyntaxNode) -> TableBinding:
        return source.annotations["binding"]


def resolve(
    ast: SyntaxNode,
    catalog: Catalog,
    default_dataset: Optional[Dataset | str] = None,
    user: Optional[str] = None,
) -> ResolvedQuery:
    if isinstance(default_dataset, str):
        default_dataset = catalog.dataset(default_dataset, user=user)

    root = ast.clone()
    version = catalog.version

    tables = _bind_tables(root, catalog, default_dataset, user)
    star_expansion = _bind_columns(root, tables)
    partition = _bind_partition(root, tables)
    dataset_versions = {
        b.dataset.name: catalog.dataset_version(b.dataset.name) for b in tables
    }

    return ResolvedQuery(
        root=root,
        tables=tables,
        partition=partition,
        catalog_version=version,
        default_dataset=default_dataset,
        user=user,
        star_expansion=star_expansion,
        dataset_versions=dataset_versions,
    )


def _bind_tables(
    root: SyntaxNode,
    catalog: Catalog,
    default_dataset: Optional[Dataset],
    user: Optional[str],
) -> list[TableBinding]:
    bindings: list[TableBinding] = []
    seen: dict[str, SyntaxNode] = {}
    for source in find_nodes(root, NodeKind.TABLE_SOURCE):
        ref = source.children[0]
        dataset_name, table_name = table_ref_parts(ref)
        if dataset_name is None:
            if default_dataset is None:
                raise UnknownTableError(
                    f"table {table_name!r} is unqualified and no default "
                    "dataset is configured")
            dataset = default_dataset
        else:
            try:
                dataset = catalog.dataset(dataset_name, user=user)
            except UnknownDatasetError as exc:
                raise UnknownTableError(str(exc)) from exc
        table = catalog.table(dataset, table_name)
        if table is None:
            raise UnknownTableError(f"unknown table {dataset.name}:{table_name}")
        alias = table_source_alias(source)
        binding = TableBinding(dataset, table, alias, source)
        effective = binding.effective_name.lower()
        if effective in seen:
            raise DuplicateAliasError(f"duplicate table name or alias {effective!r}")
        seen[effective] = source
        source.annotations["binding"] = binding
        bindings.append(binding)
    return bindings


def _bind_columns(root: SyntaxNode, tables: list[TableBinding]) -> list[ColumnBinding]:
    by_effective = {b.effective_name.lower(): b for b in tables}
    star_expansion = [ColumnBinding(b, c) for b in tables for c in b.table.columns]

    # Only a select-list star expands to all columns; COUNT(*) binds nothing.
    select_list = root.child(NodeKind.SELECT_LIST)
    if select_list is not None:
        for item in select_list.children:
            star = item.child(NodeKind.STAR)
            if star is not None:
                star.annotations["expansion"] = star_expansion

    for node in root.walk():
        if node.kind != NodeKind.COLUMN_REF:
            continue
        dataset_name, table_name, column_name = column_ref_parts(node)

        if table_name is None:
            candidates = [
                b for b in tables if b.table.column(column_name) is not None
            ]
            if not candidates:
                raise UnknownColumnError(f"unknown column {column_name!r}")
            if len(candidates) > 1:
                names = ", ".join(f"{b.dataset.name}:{b.table.name}" for b in candidates)
                raise AmbiguousColumnError(
                    f"column {column_name!r} is ambiguous between {names}")
            binding = candidates[0]
        elif dataset_name is None:
            binding = by_effective.get(table_name.lower())
            if binding is None:
                raise UnknownTableError(
                    f"column qualifier {table_name!r} matches no table or alias")
        else:
            matches = [
                b for b in tables
                if b.alias is None
                and b.dataset.name.lower() == dataset_name.lower()
                and b.table.name.lower() == table_name.lower()
            ]
            if not matches:
                raise UnknownTableError(
                    f"qualifier {dataset_name}:{table_name} matches no table in scope")
            binding = matches[0]

        column = binding.table.column(column_name)
        if column is None:
            raise UnknownColumnError(
                f"no column {column_name!r} on {binding.dataset.name}:{binding.table.name}")
        node.annotations["binding"] = ColumnBinding(binding, column)

    return star_expansion


def _bind_partition(root: SyntaxNode, tables: list[TableBinding]) -> Optional[ColumnBinding]:
    clauses = find_nodes(root, NodeKind.PARTITION_BY_CLAUSE)
    if not clauses:
        return None
    column_ref = clauses[0].children[0]
    binding: ColumnBinding = column_ref.annotations["binding"]
    if tables and binding.table is not tables[0]:
        raise ResolutionError("partitioning column must belong to the first table after FROM")
    return binding


def required_columns(rq: ResolvedQuery, table: TableBinding) -> set[str]:
    """Columns of ``table`` the query touches anywhere; ``*`` implies all."""
    needed: set[str] = set()
    for node in rq.root.walk():
        if node.kind == NodeKind.STAR and "expansion" in node.annotations:
            for cb in node.annotations["expansion"]:
                if cb.table is table:
                    needed.add(cb.column.name)
        elif node.kind == NodeKind.COLUMN_REF:
            binding: ColumnBinding = node.annotations["binding"]
            if binding.table is table:
                needed.add(binding.column.name)
    return needed
