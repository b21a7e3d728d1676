import itertools
import random

import pytest

from gw.planner import extract_pushdown_predicate, is_true_literal
from gw.schema import (
    CallableProvider,
    Catalog,
    ColumnSchema,
    Dataset,
    DatasetKind,
    DataType,
    TableSchema,
    resolve,
)
from gw.sql import NodeKind, parse, render, BASE

from oracle_eval import eval_expr


def _catalog():
    cat = Catalog()
    t1 = TableSchema("t1", [ColumnSchema("a", DataType.INTEGER),
                            ColumnSchema("b", DataType.INTEGER)])
    t2 = TableSchema("t2", [ColumnSchema("b", DataType.INTEGER),
                            ColumnSchema("c", DataType.INTEGER)])
    cat.register(Dataset("d1", DatasetKind.LOCAL, location="n1"),
                 CallableProvider(lambda ds: [t1]))
    cat.register(Dataset("d2", DatasetKind.REMOTE, location="r1"),
                 CallableProvider(lambda ds: [t2]))
    return cat


def _resolved(where_sql):
    sql = f"SELECT x.a FROM d1:t1 x JOIN d2:t2 y ON y.b = x.a WHERE {where_sql}"
    return resolve(parse(sql), _catalog(), "d1")


def _pushed(rq, table_index):
    where = rq.root.child(NodeKind.WHERE_CLAUSE).children[0]
    return extract_pushdown_predicate(where, rq.tables[table_index])


def test_single_table_conjunct_kept():
    rq = _resolved("x.a > 5 AND y.c < 3")
    assert render(_pushed(rq, 1), BASE) == "y.c < 3"
    assert render(_pushed(rq, 0), BASE) == "x.a > 5"


def test_disjunction_of_conjunctions():
    rq = _resolved("(x.a = 1 AND y.c = 2) OR (x.a = 3 AND y.c = 4)")
    assert render(_pushed(rq, 1), BASE) == "y.c = 2 OR y.c = 4"


def test_cross_table_atom_yields_true():
    rq = _resolved("x.a = y.c")
    assert is_true_literal(_pushed(rq, 1))


def test_absent_where_yields_true():
    sql = "SELECT x.a FROM d1:t1 x JOIN d2:t2 y ON y.b = x.a"
    rq = resolve(parse(sql), _catalog(), "d1")
    assert is_true_literal(extract_pushdown_predicate(None, rq.tables[1]))


def test_not_pushed_inward():
    # NOT (x.a = 1 OR y.c = 2) == NOT x.a = 1 AND NOT y.c = 2
    rq = _resolved("NOT (x.a = 1 OR y.c = 2)")
    assert render(_pushed(rq, 1), BASE) == "NOT y.c = 2"


def test_constant_atoms_are_kept():
    rq = _resolved("y.c = 2 AND 1 = 1")
    text = render(_pushed(rq, 1), BASE)
    assert "y.c = 2" in text and "1 = 1" in text


_WHERE_POOL = [
    "x.a > 2 AND y.c < 4",
    "x.a = y.c",
    "(x.a = 1 AND y.c = 2) OR (x.a = 3 AND y.c = 4)",
    "y.b = 3 OR y.c = 1",
    "NOT (x.a = 1 OR y.c = 2)",
    "x.a + y.c > 4",
    "y.c % 2 = 0 AND x.b < 3",
    "(y.b < 2 OR x.a > 3) AND y.c <> 1",
    "NOT (x.a = y.c AND y.b = 0)",
    "x.a = 1 OR y.c = 2",
    "(x.a < 2 AND (y.b = 1 OR y.c = 3)) OR (x.b = 2 AND y.c = 0)",
]


def _random_where(rng):
    atoms = [
        f"x.a {rng.choice(['<','>','=','<=','>=','<>'])} {rng.randint(0, 5)}",
        f"x.b {rng.choice(['<','>','='])} {rng.randint(0, 5)}",
        f"y.b {rng.choice(['<','>','=','<=','>='])} {rng.randint(0, 5)}",
        f"y.c {rng.choice(['<','>','='])} {rng.randint(0, 5)}",
        "x.a = y.c",
        f"y.b + y.c > {rng.randint(0, 8)}",
    ]
    rng.shuffle(atoms)
    a, b, c, d = atoms[:4]
    shape = rng.randrange(5)
    if shape == 0:
        return f"{a} AND {b}"
    if shape == 1:
        return f"({a} AND {b}) OR ({c} AND {d})"
    if shape == 2:
        return f"{a} OR {b}"
    if shape == 3:
        return f"NOT ({a} OR {b}) AND {c}"
    return f"({a} OR {b}) AND ({c} OR {d})"


def _domain_rows():
    t1_rows = [{"a": a, "b": b} for a, b in itertools.product(range(6), repeat=2)]
    t2_rows = [{"b": b, "c": c} for b, c in itertools.product(range(6), repeat=2)]
    return t1_rows, t2_rows


@pytest.mark.parametrize("where_sql", _WHERE_POOL)
def test_pushdown_soundness_brute_force(where_sql):
    _assert_sound(where_sql)


def test_pushdown_soundness_randomized():
    rng = random.Random(20240)
    for _ in range(60):
        _assert_sound(_random_where(rng))


def _assert_sound(where_sql):
    rq = _resolved(where_sql)
    where = rq.root.child(NodeKind.WHERE_CLAUSE).children[0]
    t1b, t2b = rq.tables
    pushed = extract_pushdown_predicate(where, t2b)
    t1_rows, t2_rows = _domain_rows()
    # every satisfying assignment keeps its t2 row in the filtered set
    for r1 in t1_rows:
        for r2 in t2_rows:
            if eval_expr(where, {t1b: r1, t2b: r2}):
                assert eval_expr(pushed, {t2b: r2}), (
                    f"{where_sql}: pushdown excluded needed row {r2}: "
                    f"{render(pushed, BASE)}")


def test_conjunct_only_where_is_exact():
    # for pure conjunctions the filtered set equals rows passing every
    # single-table conjunct
    where_sql = "y.b > 1 AND y.c < 4 AND x.a = 2"
    rq = _resolved(where_sql)
    where = rq.root.child(NodeKind.WHERE_CLAUSE).children[0]
    t2b = rq.tables[1]
    pushed = extract_pushdown_predicate(where, t2b)
    _, t2_rows = _domain_rows()
    kept = [r for r in t2_rows if eval_expr(pushed, {t2b: r})]
    expected = [r for r in t2_rows if r["b"] > 1 and r["c"] < 4]
    assert kept == expected


def test_expansion_cap_falls_back_to_true():
    # a single OR clause over an 11-way AND of ORs expands to 2**11 > 1024
    # disjuncts, which trips the cap and soundly degrades to TRUE
    rq = _resolved("x.a = y.c OR (" + " AND ".join(
        f"(x.a = {i % 5} OR y.c = {i % 3})" for i in range(11)) + ")")
    where = rq.root.child(NodeKind.WHERE_CLAUSE).children[0]
    assert is_true_literal(extract_pushdown_predicate(where, rq.tables[1]))

    # the same subexpression as a top-level conjunction stays cheap: each
    # y-only clause survives intact
    rq2 = _resolved(" AND ".join(f"(y.b = {i % 4} OR y.c = {i % 3})" for i in range(11)))
    where2 = rq2.root.child(NodeKind.WHERE_CLAUSE).children[0]
    assert not is_true_literal(extract_pushdown_predicate(where2, rq2.tables[1]))
