import pytest

from gw.schema import (
    AmbiguousColumnError,
    CallableProvider,
    Catalog,
    ColumnSchema,
    Dataset,
    DatasetKind,
    DataType,
    DuplicateAliasError,
    Metadata,
    SchemaFetchError,
    TableSchema,
    UnknownColumnError,
    UnknownObjectError,
    UnknownTableError,
    required_columns,
    resolve,
)
from gw.sql import NodeKind, parse


def _photo_table():
    return TableSchema("photo", [
        ColumnSchema("objid", DataType.INTEGER, nullable=False),
        ColumnSchema("ra", DataType.FLOAT),
        ColumnSchema("dec", DataType.FLOAT),
    ])


def _spec_table():
    return TableSchema("spec", [
        ColumnSchema("objid", DataType.INTEGER, nullable=False),
        ColumnSchema("z", DataType.FLOAT),
        ColumnSchema("v", DataType.INTEGER),
        ColumnSchema("k", DataType.INTEGER),
    ])


@pytest.fixture
def catalog():
    cat = Catalog()
    d1 = Dataset("d1", DatasetKind.LOCAL, location="n1")
    d2 = Dataset("d2", DatasetKind.REMOTE, dialect_name="variant", location="remote-1")
    cat.register(d1, CallableProvider(lambda ds: [_photo_table()]))
    cat.register(d2, CallableProvider(lambda ds: [_spec_table()]))
    return cat


def test_schema_cache_hit(catalog):
    provider = catalog._providers["d1"]
    catalog.get_schema("d1")
    catalog.get_schema("d1")
    assert provider.calls == 1
    assert catalog.cache_hits == 1


def test_invalidate_forces_requery(catalog):
    provider = catalog._providers["d1"]
    catalog.get_schema("d1")
    catalog.invalidate("d1")
    catalog.get_schema("d1")
    assert provider.calls == 2


def test_invalidate_bumps_version(catalog):
    v = catalog.version
    catalog.invalidate("d1")
    assert catalog.version == v + 1


def test_remote_dataset_same_shape(catalog):
    remote = catalog.get_schema("d2")
    assert isinstance(remote[0], TableSchema)
    assert {c.name for c in remote[0].columns} == {"objid", "z", "v", "k"}


def test_fetch_error_carries_dataset_name():
    cat = Catalog()

    def boom(ds):
        raise ConnectionError("backend down")

    cat.register(Dataset("dx", DatasetKind.REMOTE, location="x"), CallableProvider(boom))
    with pytest.raises(SchemaFetchError) as exc:
        cat.get_schema("dx")
    assert exc.value.dataset_name == "dx"


def test_resolve_unqualified_table(catalog):
    rq = resolve(parse("SELECT objid FROM photo"), catalog, "d1")
    assert len(rq.tables) == 1
    assert rq.tables[0].qualified_name == ("d1", "photo")
    col = rq.root.child(NodeKind.SELECT_LIST).children[0].children[0]
    assert col.annotations["binding"].column.name == "objid"


def test_resolve_ambiguous_column(catalog):
    ast = parse("SELECT objid FROM d1:photo p JOIN d2:spec s ON p.objid = s.objid")
    with pytest.raises(AmbiguousColumnError) as exc:
        resolve(ast, catalog, "d1")
    assert "d1:photo" in str(exc.value) and "d2:spec" in str(exc.value)


def test_resolve_star_expansion(catalog):
    rq = resolve(parse("SELECT * FROM photo"), catalog, "d1")
    star = rq.root.child(NodeKind.SELECT_LIST).children[0].children[0]
    names = [cb.column.name for cb in star.annotations["expansion"]]
    assert names == ["objid", "ra", "dec"]


def test_resolve_errors(catalog):
    with pytest.raises(UnknownTableError):
        resolve(parse("SELECT a FROM nope"), catalog, "d1")
    with pytest.raises(UnknownColumnError):
        resolve(parse("SELECT nope FROM photo"), catalog, "d1")
    with pytest.raises(DuplicateAliasError):
        resolve(parse("SELECT p.ra FROM photo p JOIN d2:spec p ON p.ra = 1"), catalog, "d1")


def test_resolution_is_pure(catalog):
    ast = parse("SELECT objid FROM photo")
    r1 = resolve(ast, catalog, "d1")
    r2 = resolve(ast, catalog, "d1")
    assert r1.catalog_version == r2.catalog_version
    assert "binding" not in ast.child(NodeKind.FROM_CLAUSE).children[0].annotations


def test_required_columns_join(catalog):
    rq = resolve(
        parse("SELECT p.ra FROM d1:photo p JOIN d2:spec s ON s.k = p.objid WHERE s.v > 1"),
        catalog, "d1")
    spec_binding = rq.tables[1]
    assert required_columns(rq, spec_binding) == {"k", "v"}
    photo_binding = rq.tables[0]
    assert required_columns(rq, photo_binding) == {"ra", "objid"}


def test_required_columns_star(catalog):
    rq = resolve(parse("SELECT * FROM d1:photo p JOIN d2:spec s ON s.objid = p.objid"),
                 catalog, "d1")
    assert required_columns(rq, rq.tables[1]) == {"objid", "z", "v", "k"}


def test_required_columns_count_star_minimal(catalog):
    rq = resolve(parse("SELECT COUNT(*) FROM d1:photo p JOIN d2:spec s ON s.objid = p.objid"),
                 catalog, "d1")
    assert required_columns(rq, rq.tables[1]) == {"objid"}


def test_required_columns_minimality_brute_force(catalog):
    sql = "SELECT p.ra FROM d1:photo p JOIN d2:spec s ON s.k = p.objid WHERE s.v > 1"
    rq = resolve(parse(sql), catalog, "d1")
    spec = rq.tables[1]
    needed = required_columns(rq, spec)
    # dropping any needed column breaks resolution of the fetch-reduced catalog
    for dropped in needed:
        slim = TableSchema("spec", [c for c in _spec_table().columns if c.name != dropped])
        cat = Catalog()
        cat.register(Dataset("d1", DatasetKind.LOCAL, location="n1"),
                     CallableProvider(lambda ds: [_photo_table()]))
        cat.register(Dataset("d2", DatasetKind.REMOTE, location="r"),
                     CallableProvider(lambda ds, t=slim: [t]))
        with pytest.raises(UnknownColumnError):
            resolve(parse(sql), cat, "d1")


def test_metadata_round_trip(catalog):
    md = Metadata(content_id="pos.eq.ra", unit="deg", description="Right ascension")
    catalog.set_metadata("d1", "photo.ra", md)
    assert catalog.get_metadata("d1", "photo.ra") == md


def test_metadata_defaults_empty(catalog):
    md = catalog.get_metadata("d1", "photo.dec")
    assert md == Metadata("", "", "")


def test_metadata_unknown_path(catalog):
    with pytest.raises(UnknownObjectError):
        catalog.set_metadata("d1", "photo.nope", Metadata(unit="x"))
    with pytest.raises(UnknownObjectError):
        catalog.get_metadata("d1", "ghost", )


def test_metadata_survives_cache_invalidation(catalog):
    catalog.set_metadata("d1", "photo.ra", Metadata(unit="deg"))
    catalog.invalidate("d1")
    tables = catalog.get_schema("d1")
    ra = tables[0].column("ra")
    assert ra.metadata.unit == "deg"


def test_mydb_per_user_binding(catalog):
    mydb = Dataset("mydb_alice", DatasetKind.MYDB, location="n1")
    catalog.register(mydb, CallableProvider(lambda ds: []))
    catalog.bind_mydb("alice", "mydb_alice")
    assert catalog.dataset("mydb", user="alice").name == "mydb_alice"
    assert catalog.mydb_of("alice").name == "mydb_alice"


def test_cached_and_uncached_resolution_agree(catalog):
    # with invalidation after every mutation, a warm cache and a cold
    # catalog resolve every corpus query identically
    import corpus as corpus_mod
    from gw.sql import parse as parse_sql

    queries = [q for q in corpus_mod.HAND_WRITTEN if "d1:" in q or "d2:" in q]

    usable = []
    for sql in queries:
        try:
            resolve(parse_sql(sql), catalog, "d1")
            usable.append(sql)
        except Exception:
            continue
    assert usable, "corpus produced no resolvable fixture queries"

    for sql in usable:
        warm = resolve(parse_sql(sql), catalog, "d1")
        catalog.invalidate()
        cold = resolve(parse_sql(sql), catalog, "d1")
        assert [(b.dataset.name, b.table.name, b.alias) for b in warm.tables] == \
            [(b.dataset.name, b.table.name, b.alias) for b in cold.tables]
        warm_cols = [cb.column.name for n in warm.root.walk()
                     for cb in [n.annotations.get("binding")]
                     if cb is not None and hasattr(cb, "column")]
        cold_cols = [cb.column.name for n in cold.root.walk()
                     for cb in [n.annotations.get("binding")]
                     if cb is not None and hasattr(cb, "column")]
        assert warm_cols == cold_cols
