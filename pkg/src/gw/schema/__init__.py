"""Schema catalog, name resolution, and the three-value metadata store."""

from .catalog import (
    CallableProvider,
    Catalog,
    MemoryMetadataStore,
    MetadataStore,
    SchemaFetchError,
    SchemaProvider,
    UnknownDatasetError,
    UnknownObjectError,
)
from .model import ColumnSchema, Dataset, DatasetKind, DataType, Metadata, TableSchema
from .resolve import (
    AmbiguousColumnError,
    ColumnBinding,
    DuplicateAliasError,
    ResolutionError,
    ResolvedQuery,
    TableBinding,
    UnknownColumnError,
    UnknownTableError,
    required_columns,
    resolve,
)

__all__ = [
    "Catalog", "CallableProvider", "MemoryMetadataStore", "MetadataStore",
    "SchemaFetchError", "SchemaProvider", "UnknownDatasetError", "UnknownObjectError",
    "ColumnSchema", "Dataset", "DatasetKind", "DataType", "Metadata", "TableSchema",
    "AmbiguousColumnError", "ColumnBinding", "DuplicateAliasError", "ResolutionError",
    "ResolvedQuery", "TableBinding", "UnknownColumnError", "UnknownTableError",
    "required_columns", "resolve",
]
