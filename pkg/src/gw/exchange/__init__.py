"""Data in and out: formatter plug-ins, script metadata, plot preprocessing."""

from .csvfmt import CsvError, infer_schema, read_table, write_header, write_row, write_table
from .formatter import (
    CsvFormatter,
    Formatter,
    SchemaMismatchError,
    UnknownFormatError,
    export_table,
    formats,
    get_formatter,
    import_file,
    register_formatter,
)
from .plots import PlotQueryError, preprocess_plot_script
from .sqlmeta import MetadataDoc, MetadataScriptError, apply_metadata, extract_metadata

__all__ = [
    "CsvError", "infer_schema", "read_table", "write_header", "write_row", "write_table",
    "CsvFormatter", "Formatter", "SchemaMismatchError", "UnknownFormatError",
    "export_table", "formats", "get_formatter", "import_file", "register_formatter",
    "PlotQueryError", "preprocess_plot_script",
    "MetadataDoc", "MetadataScriptError", "apply_metadata", "extract_metadata",
]
