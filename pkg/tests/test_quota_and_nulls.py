"""Upload quota enforcement, cache eviction, and NULL-aware pushdown."""

import io
import random
import time

import pytest
from fastapi.testclient import TestClient

from gw.engine import ExecContext, execute_distributed
from gw.engine.cache import CachedTable, TableCache
from gw.planner import build_distributed_plan
from gw.schema import ColumnSchema, DatasetKind, DataType, TableSchema
from gw.service import create_app
from gw.system import System

from cluster_fixtures import DatasetFixture, build_cluster
from config_fixtures import write_config


def test_upload_beyond_quota_fails_job_without_partial(tmp_path):
    config = write_config(
        tmp_path,
        extra_cluster_props='    <property name="mydb-row-quota">5</property>')
    system = System.from_config(config, state_dir=tmp_path / "state")
    system.start()
    client = TestClient(create_app(system))
    try:
        token = client.post("/api/sessions", json={
            "user": "alice", "password": "secret"}).json()["token"]
        headers = {"Authorization": f"Bearer {token}"}
        payload = b"a\r\n" + b"".join(b"%d\r\n" % i for i in range(10))
        response = client.post(
            "/api/mydb/tables?table=toobig&format=csv",
            files={"file": ("big.csv", io.BytesIO(payload), "text/csv")},
            headers=headers)
        assert response.status_code == 202
        job_id = response.json()["job"]
        deadline = time.time() + 20
        while time.time() < deadline:
            body = client.get(f"/api/jobs/{job_id}", headers=headers).json()
            if body["state"] in ("completed", "failed"):
                break
            time.sleep(0.05)
        assert body["state"] == "failed"
        assert "quota" in body["error"].lower()
        names = [t["name"] for t in
                 client.get("/api/mydb/tables", headers=headers).json()]
        assert "toobig" not in names

        # within the quota the same flow succeeds
        small = b"a\r\n1\r\n2\r\n"
        response = client.post(
            "/api/mydb/tables?table=fits&format=csv",
            files={"file": ("s.csv", io.BytesIO(small), "text/csv")},
            headers=headers)
        job_id = response.json()["job"]
        deadline = time.time() + 20
        while time.time() < deadline:
            body = client.get(f"/api/jobs/{job_id}", headers=headers).json()
            if body["state"] in ("completed", "failed"):
                break
            time.sleep(0.05)
        assert body["state"] == "completed", body
    finally:
        system.stop(drain=False)


def test_table_cache_lru_eviction():
    cache = TableCache(byte_budget=1000)
    first = CachedTable("k1", "t1", rows=10, approx_bytes=600)
    second = CachedTable("k2", "t2", rows=10, approx_bytes=600)
    assert cache.store(first) == []
    time.sleep(0.01)
    assert cache.lookup("k1") is not None
    time.sleep(0.01)
    evicted = cache.store(second)
    # over budget: the least recently used entry (k1) goes
    assert [e.key for e in evicted] == ["k1"]
    assert cache.lookup("k1") is None
    assert cache.lookup("k2") is not None


def test_cache_never_evicts_sole_entry():
    cache = TableCache(byte_budget=10)
    huge = CachedTable("k", "t", rows=1, approx_bytes=10_000)
    assert cache.store(huge) == []
    assert cache.lookup("k") is not None


def test_pushdown_with_null_predicates_matches_oracle(tmp_path):
    rng = random.Random(31)
    photo = TableSchema("photo", [ColumnSchema("objid", DataType.INTEGER)])
    spec = TableSchema("spec", [
        ColumnSchema("objid", DataType.INTEGER),
        ColumnSchema("v", DataType.INTEGER),
    ])
    photo_rows = [(i,) for i in range(30)]
    spec_rows = []
    for i in range(60):
        v = None if rng.random() < 0.3 else rng.randrange(10)
        spec_rows.append((rng.randrange(30), v))
    cluster = build_cluster(tmp_path, [
        DatasetFixture("d0", [photo], {"photo": photo_rows}),
        DatasetFixture("d1", [spec], {"spec": spec_rows},
                       kind=DatasetKind.REMOTE, dialect="variant"),
    ])
    for predicate, expect_reduced in [
        ("s.v IS NOT NULL", True),
        ("s.v IS NULL", True),
        ("s.v IS NULL OR s.v > 5", True),
        ("NOT s.v IS NULL AND p.objid < 20", True),
    ]:
        sql = (f"SELECT p.objid AS o0, s.v AS o1 FROM d0:photo p "
               f"JOIN d1:spec s ON s.objid = p.objid WHERE {predicate}")
        rq = cluster.resolve(sql)
        plan = build_distributed_plan(rq, cluster.env.view, job_tag="n",
                                      destination_table=f"o{hash(predicate) % 97}")
        ctx = ExecContext(cluster.env, job_id="n", user="u")
        _, table, _ = execute_distributed(plan, ctx)
        mydb = cluster.catalog.mydb_of("u")
        got = sorted(cluster.read_table(mydb.location, mydb.name, table), key=repr)
        assert got == cluster.oracle_rows(sql), predicate
        if expect_reduced:
            full = cluster.remotes["d1"].table_row_count("d1", "spec")
            assert ctx.fetch_events[0].rows < full, predicate
