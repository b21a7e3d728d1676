import pytest

from gw.sql import BASE, NodeKind, RewriteError, parse, render, trees_equal
from gw.sql.transform import add_where_conjunct, remove_clause, substitute_table_refs


def test_remove_order_by():
    tree = parse("SELECT a FROM t ORDER BY a")
    out = remove_clause(tree, NodeKind.ORDER_BY_CLAUSE)
    assert trees_equal(out, parse("SELECT a FROM t"))


def test_remove_absent_clause_is_noop():
    tree = parse("SELECT a FROM t")
    out = remove_clause(tree, NodeKind.ORDER_BY_CLAUSE)
    assert trees_equal(out, tree)


def test_remove_into_and_order_by():
    tree = parse("SELECT a INTO mydb:out FROM t ORDER BY a")
    out = remove_clause(remove_clause(tree, NodeKind.INTO_CLAUSE), NodeKind.ORDER_BY_CLAUSE)
    assert trees_equal(out, parse("SELECT a FROM t"))
    # original untouched
    assert tree.child(NodeKind.INTO_CLAUSE) is not None


def test_remove_required_clause_rejected():
    tree = parse("SELECT a FROM t")
    with pytest.raises(ValueError):
        remove_clause(tree, NodeKind.FROM_CLAUSE)


def test_substitute_preserves_alias():
    tree = parse("SELECT s.objid FROM d2:spec s WHERE s.objid > 5")
    out = substitute_table_refs(tree, {("d2", "spec"): ("tempdb", "cache_0017")})
    text = render(out, BASE)
    assert "tempdb:cache_0017 AS s" in text
    assert "s.objid" in text
    assert "spec" not in text


def test_substitute_empty_mapping_identity():
    tree = parse("SELECT s.objid FROM d2:spec s")
    out = substitute_table_refs(tree, {})
    assert trees_equal(out, tree)


def test_substitute_rewrites_bare_table_qualifiers():
    tree = parse("SELECT spec.objid FROM d2:spec WHERE spec.z > 1")
    out = substitute_table_refs(tree, {("d2", "spec"): ("tempdb", "c1")})
    text = render(out, BASE)
    assert "tempdb:c1" in text
    assert "c1.objid" in text and "c1.z" in text


def test_substitute_rewrites_dataset_qualified_columns():
    tree = parse("SELECT d2:spec.objid FROM d2:spec")
    out = substitute_table_refs(tree, {("d2", "spec"): ("tempdb", "c1")})
    assert "c1.objid" in render(out, BASE)


def test_substitute_self_join_keeps_aliases():
    tree = parse("SELECT a.objid FROM d2:spec a JOIN d2:spec b ON b.objid = a.objid")
    out = substitute_table_refs(tree, {("d2", "spec"): ("tempdb", "c1")})
    text = render(out, BASE)
    assert text.count("tempdb:c1") == 2
    assert "AS a" in text and "AS b" in text


def test_substitute_collision_detected():
    tree = parse("SELECT t.a FROM d1:t JOIN d2:u ON u.k = t.k")
    with pytest.raises(RewriteError):
        substitute_table_refs(
            tree,
            {("d1", "t"): ("tempdb", "c1"), ("d2", "u"): ("tempdb", "c1")},
        )


def test_substitute_uses_default_dataset():
    tree = parse("SELECT a FROM photo")
    out = substitute_table_refs(tree, {("d1", "photo"): ("tempdb", "c9")}, default_dataset="d1")
    assert "tempdb:c9" in render(out, BASE)


def test_transformation_locality():
    tree = parse("SELECT a, b FROM t JOIN u ON u.k = t.k WHERE a > 1 ORDER BY b")
    out = remove_clause(tree, NodeKind.ORDER_BY_CLAUSE)
    # all other clauses structurally identical
    for kind in (NodeKind.SELECT_LIST, NodeKind.FROM_CLAUSE, NodeKind.WHERE_CLAUSE):
        assert trees_equal(out.child(kind), tree.child(kind))


def test_add_where_conjunct():
    tree = parse("SELECT a FROM t WHERE a > 1")
    pred = parse("SELECT x FROM q WHERE b <= 7").child(NodeKind.WHERE_CLAUSE).children[0]
    out = add_where_conjunct(tree, pred)
    assert trees_equal(out, parse("SELECT a FROM t WHERE a > 1 AND b <= 7"))

    bare = parse("SELECT a FROM t ORDER BY a")
    out2 = add_where_conjunct(bare, pred)
    assert trees_equal(out2, parse("SELECT a FROM t WHERE b <= 7 ORDER BY a"))
