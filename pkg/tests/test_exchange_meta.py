import pytest

from gw.exchange import (
    MetadataDoc,
    MetadataScriptError,
    apply_metadata,
    extract_metadata,
    preprocess_plot_script,
    PlotQueryError,
)
from gw.schema import (
    CallableProvider,
    Catalog,
    ColumnSchema,
    Dataset,
    DatasetKind,
    DataType,
    Metadata,
    TableSchema,
)

FIXTURE_SCRIPT = """\
--/ <summary>Observation log</summary>
CREATE TABLE runs
(
    --/ <summary>Run identifier</summary>
    --/ <content>meta.id</content>
    run_id INTEGER NOT NULL,

    --/ <summary>Measurement start</summary>
    --/ <unit>s</unit>
    t_start REAL,

    t_stop REAL,

    PRIMARY KEY (run_id)
);

--/ <summary>Detected objects</summary>
CREATE TABLE objects
(
    --/ <content>pos.eq.ra</content>
    --/ <unit>deg</unit>
    --/ <summary>Right ascension</summary>
    ra REAL,
    dec REAL
);
"""


def test_extract_table_and_column_metadata():
    doc = extract_metadata(FIXTURE_SCRIPT)
    assert doc.entries["runs"].description == "Observation log"
    assert doc.entries["runs.run_id"] == Metadata("meta.id", "", "Run identifier")
    assert doc.entries["runs.t_start"] == Metadata("", "s", "Measurement start")
    assert "runs.t_stop" not in doc.entries
    assert doc.entries["objects.ra"] == Metadata("pos.eq.ra", "deg", "Right ascension")


def test_extract_empty_script():
    assert extract_metadata("CREATE TABLE t (a INTEGER);").entries == {}
    assert extract_metadata("").entries == {}


def test_blank_separated_blocks_merge_in_order():
    script = """\
--/ <summary>First</summary>

--/ <unit>m</unit>
CREATE TABLE t
(
    a INTEGER
);
"""
    doc = extract_metadata(script)
    assert doc.entries["t"] == Metadata("", "m", "First")


def test_malformed_xml_names_line():
    script = "--/ <summary>broken\nCREATE TABLE t (a INTEGER);"
    with pytest.raises(MetadataScriptError) as exc:
        extract_metadata(script)
    assert exc.value.line == 1


def test_orphan_block_dropped():
    doc = extract_metadata("CREATE TABLE t (a INTEGER);\n--/ <summary>late</summary>\n")
    assert doc.entries == {}


def test_xml_round_trip():
    doc = extract_metadata(FIXTURE_SCRIPT)
    xml = doc.to_xml()
    back = MetadataDoc.from_xml(xml)
    assert back.entries == doc.entries
    assert back.to_xml() == xml


def _catalog_with_runs():
    runs = TableSchema("runs", [
        ColumnSchema("run_id", DataType.INTEGER, nullable=False),
        ColumnSchema("t_start", DataType.FLOAT),
        ColumnSchema("t_stop", DataType.FLOAT),
    ])
    objects = TableSchema("objects", [
        ColumnSchema("ra", DataType.FLOAT),
        ColumnSchema("dec", DataType.FLOAT),
    ])
    cat = Catalog()
    cat.register(Dataset("d1", DatasetKind.LOCAL, location="n1"),
                 CallableProvider(lambda ds: [runs, objects]))
    return cat


def test_apply_and_read_back():
    cat = _catalog_with_runs()
    doc = extract_metadata(FIXTURE_SCRIPT)
    errors = apply_metadata(doc, cat, "d1")
    assert errors == []
    assert cat.get_metadata("d1", "runs.t_start") == Metadata("", "s", "Measurement start")
    assert cat.get_metadata("d1", "objects.ra").content_id == "pos.eq.ra"


def test_apply_reports_unknown_paths_but_applies_rest():
    cat = _catalog_with_runs()
    doc = MetadataDoc(entries={
        "runs.run_id": Metadata("meta.id", "", "id"),
        "runs.ghost": Metadata("", "", "nope"),
    })
    errors = apply_metadata(doc, cat, "d1")
    assert len(errors) == 1 and errors[0][0] == "runs.ghost"
    assert cat.get_metadata("d1", "runs.run_id").content_id == "meta.id"


def test_reapply_is_idempotent():
    cat = _catalog_with_runs()
    doc = extract_metadata(FIXTURE_SCRIPT)
    apply_metadata(doc, cat, "d1")
    version = cat.version
    apply_metadata(doc, cat, "d1")
    assert cat.version == version  # no churn on identical re-apply


# -- plot preprocessing ----------------------------------------------------


def test_plot_single_query(tmp_path):
    calls = []

    def run(sql):
        calls.append(sql)
        yield b"a\r\n1\r\n"

    script = 'plot sql("SELECT a FROM t") with lines\n'
    rewritten, files = preprocess_plot_script(script, run, tmp_path)
    assert len(files) == 1
    assert files[0].read_bytes() == b"a\r\n1\r\n"
    assert str(files[0]) in rewritten
    assert "sql(" not in rewritten
    assert calls == ["SELECT a FROM t"]


def test_plot_no_queries(tmp_path):
    script = "set xlabel 'x'\nplot 'data.csv'\n"
    rewritten, files = preprocess_plot_script(script, lambda sql: iter(()), tmp_path)
    assert rewritten == script
    assert files == []


def test_plot_two_queries_in_order(tmp_path):
    def run(sql):
        yield sql.encode() + b"\r\n"

    script = 'plot sql("Q1") , sql("Q2")\n'
    rewritten, files = preprocess_plot_script(script, run, tmp_path)
    assert [p.read_bytes() for p in files] == [b"Q1\r\n", b"Q2\r\n"]
    assert rewritten.index(str(files[0])) < rewritten.index(str(files[1]))


def test_plot_failure_names_ordinal(tmp_path):
    def run(sql):
        raise RuntimeError("boom")

    with pytest.raises(PlotQueryError) as exc:
        preprocess_plot_script('sql("Q1")', run, tmp_path)
    assert exc.value.ordinal == 1
