"""Plot-script preprocessing.

Embedded queries delimited as ``sql("...")`` run against the user's MyDB;
each result lands in a CSV temp file whose quoted path replaces the
original span.  Invoking the plotting tool itself is out of scope here.
"""

from __future__ import annotations

import re
from pathlib import Path
from typing import Callable, Iterator

_EMBEDDED_SQL = re.compile(r'sql\(\s*"((?:[^"\\]|\\.)*)"\s*\)')


class PlotQueryError(Exception):
    """Failure of an embedded query, named by its 1-based ordinal."""

    def __init__(self, ordinal: int, cause: Exception):
        super().__init__(f"embedded query #{ordinal} failed: {cause}")
        self.ordinal = ordinal


# run_query(sql) returns the CSV byte chunks of the result
QueryRunner = Callable[[str], Iterator[bytes]]


def preprocess_plot_script(
    script: str,
    run_query: QueryRunner,
    output_dir: Path | str,
    stem: str = "plotdata",
) -> tuple[str, list[Path]]:
    """Rewritten script plus the data files backing it, in appearance order."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    files: list[Path] = []

    def substitute(match: re.Match) -> str:
        ordinal = len(files) + 1
        sql = match.group(1).replace('\\"', '"')
        path = output_dir / f"{stem}_{ordinal}.csv"
        try:
            with open(path, "wb") as fh:
                for chunk in run_query(sql):
                    fh.write(chunk)
        except Exception as exc:
            raise PlotQueryError(ordinal, exc) from exc
        files.append(path)
        return '"' + str(path) + '"'

    rewritten = _EMBEDDED_SQL.sub(substitute, script)
    return rewritten, files
