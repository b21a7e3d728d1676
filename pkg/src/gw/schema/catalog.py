"""The schema catalog: uniform, cached access to every dataset's tables.

Schemas are fetched from per-dataset providers (an embedded engine, a
remote adapter) on first use and served from cache afterwards; the hit
counter is observable so tests can assert cache behavior.  Mutations bump
a snapshot version that plans pin and execution re-checks.
"""

from __future__ import annotations

import threading
from typing import Callable, Optional, Protocol

from .model import Dataset, Metadata, TableSchema


class SchemaProvider(Protocol):
    def list_tables(self, dataset: Dataset) -> list[TableSchema]:
        ...


class SchemaFetchError(Exception):
    def __init__(self, dataset_name: str, cause: Exception):
        super().__init__(f"cannot fetch schema for dataset {dataset_name!r}: {cause}")
        self.dataset_name = dataset_name


class MetadataStore(Protocol):
    def get(self, dataset: str, path: str) -> Metadata: ...
    def put(self, dataset: str, path: str, metadata: Metadata) -> None: ...


class MemoryMetadataStore:
    def __init__(self):
        self._data: dict[tuple[str, str], Metadata] = {}

    def get(self, dataset: str, path: str) -> Metadata:
        return self._data.get((dataset.lower(), path.lower()), Metadata())

    def put(self, dataset: str, path: str, metadata: Metadata) -> None:
        self._data[(dataset.lower(), path.lower())] = metadata


class UnknownDatasetError(Exception):
    pass


class UnknownObjectError(Exception):
    pass


class Catalog:
    """Datasets, cached schemas, and the three-value metadata store.

    Reads are safe for concurrent callers; mutations serialize behind one
    lock (single-writer contract).
    """

    def __init__(self, metadata_store: Optional[MetadataStore] = None):
        self._lock = threading.RLock()
        self._datasets: dict[str, Dataset] = {}
        self._providers: dict[str, SchemaProvider] = {}
        self._cache: dict[str, list[TableSchema]] = {}
        self._metadata = metadata_store or MemoryMetadataStore()
        self._version = 0
        self._dataset_versions: dict[str, int] = {}
        self.cache_hits = 0
        self.cache_misses = 0
        # user name -> dataset name of that user's private sandbox
        self._mydb_owners: dict[str, str] = {}

    @property
    def version(self) -> int:
        return self._version

    def dataset_version(self, name: str) -> int:
        """Per-dataset schema version; bumps on registration and invalidation."""
        return self._dataset_versions.get(name.lower(), 0)

    # -- dataset registration ------------------------------------------------

    def register(self, dataset: Dataset, provider: SchemaProvider) -> None:
        with self._lock:
            key = dataset.name.lower()
            if key in self._datasets:
                raise ValueError(f"dataset {dataset.name!r} already registered")
            self._datasets[key] = dataset
            self._providers[key] = provider
            self._version += 1
            self._dataset_versions[key] = self.dataset_version(key) + 1

    def unregister(self, name: str) -> None:
        with self._lock:
            key = name.lower()
            self._datasets.pop(key, None)
            self._providers.pop(key, None)
            self._cache.pop(key, None)
            self._version += 1
            self._dataset_versions[key] = self.dataset_version(key) + 1

    def dataset(self, name: str, user: Optional[str] = None) -> Dataset:
        """Resolve a dataset name; ``mydb`` is per-user and needs a user context."""
        key = name.lower()
        if key == "mydb" and user is not None:
            owned = self._mydb_owners.get(user.lower())
            if owned is None:
                raise UnknownDatasetError(f"user {user!r} has no MyDB")
            key = owned
        ds = self._datasets.get(key)
        if ds is None:
            raise UnknownDatasetError(f"unknown dataset {name!r}")
        return ds

    def bind_mydb(self, user: str, dataset_name: str) -> None:
        with self._lock:
            self._mydb_owners[user.lower()] = dataset_name.lower()

    def mydb_of(self, user: str) -> Optional[Dataset]:
        key = self._mydb_owners.get(user.lower())
        return self._datasets.get(key) if key else None

    def datasets(self) -> list[Dataset]:
        return list(self._datasets.values())

    # -- schemas ---------------------------------------------------------------

    def get_schema(self, dataset: Dataset | str) -> list[TableSchema]:
        name = dataset if isinstance(dataset, str) else dataset.name
        key = name.lower()
        with self._lock:
            if key in self._cache:
                self.cache_hits += 1
                return self._cache[key]
            ds = self._datasets.get(key)
            if ds is None:
                raise UnknownDatasetError(f"unknown dataset {name!r}")
            provider = self._providers[key]
            self.cache_misses += 1
            try:
                tables = provider.list_tables(ds)
            except Exception as exc:  # schema-fetch error carries the dataset name
                raise SchemaFetchError(ds.name, exc) from exc
            self.load_object_metadata(ds.name, tables)
            self._cache[key] = tables
            return tables

    def table(self, dataset: Dataset | str, table_name: str) -> Optional[TableSchema]:
        lowered = table_name.lower()
        for t in self.get_schema(dataset):
            if t.name.lower() == lowered:
                return t
        return None

    def invalidate(self, dataset_name: Optional[str] = None) -> None:
        with self._lock:
            if dataset_name is None:
                self._cache.clear()
                for key in self._datasets:
                    self._dataset_versions[key] = self.dataset_version(key) + 1
            else:
                key = dataset_name.lower()
                self._cache.pop(key, None)
                self._dataset_versions[key] = self.dataset_version(key) + 1
            self._version += 1

    # -- metadata ----------------------------------------------------------------

    def set_metadata(self, dataset: Dataset | str, object_path: str, metadata: Metadata) -> None:
        name = dataset if isinstance(dataset, str) else dataset.name
        self._check_object_path(name, object_path)
        with self._lock:
            self._metadata.put(name, object_path, metadata)
            self._attach_metadata(name, object_path, metadata)

    def get_metadata(self, dataset: Dataset | str, object_path: str) -> Metadata:
        name = dataset if isinstance(dataset, str) else dataset.name
        self._check_object_path(name, object_path)
        return self._metadata.get(name, object_path)

    def _check_object_path(self, dataset_name: str, object_path: str) -> None:
        parts = object_path.split(".")
        if len(parts) not in (1, 2):
            raise UnknownObjectError(f"malformed object path {object_path!r}")
        table = self.table(dataset_name, parts[0])
        if table is None:
            raise UnknownObjectError(f"no table {parts[0]!r} in dataset {dataset_name!r}")
        if len(parts) == 2 and table.column(parts[1]) is None:
            raise UnknownObjectError(
                f"no column {parts[1]!r} on {dataset_name}:{parts[0]}")

    def _attach_metadata(self, dataset_name: str, object_path: str, metadata: Metadata) -> None:
        # Keep the cached TableSchema objects in sync so schema reads carry
        # fresh metadata without a cache round-trip.
        parts = object_path.split(".")
        table = self.table(dataset_name, parts[0])
        if len(parts) == 1:
            table.metadata = metadata
        else:
            table.column(parts[1]).metadata = metadata

    def load_object_metadata(self, dataset_name: str, tables: list[TableSchema]) -> None:
        """Stamp stored metadata onto freshly fetched schemas."""
        for t in tables:
            md = self._metadata.get(dataset_name, t.name)
            if not md.empty:
                t.metadata = md
            for c in t.columns:
                md = self._metadata.get(dataset_name, f"{t.name}.{c.name}")
                if not md.empty:
                    c.metadata = md


class CallableProvider:
    """Adapter turning a plain callable into a SchemaProvider."""

    def __init__(self, fn: Callable[[Dataset], list[TableSchema]]):
        self._fn = fn
        self.calls = 0

    def list_tables(self, dataset: Dataset) -> list[TableSchema]:
        self.calls += 1
        return self._fn(dataset)
