"""The HTTP data surface and job API.

Stateless JSON handlers over the shared registry and scheduler; bulk table
data moves as CSV.  Every mutating endpoint other than sessions and table
deletion is an asynchronous job submission answering 202 with a pollable
job id.  Error bodies are uniformly {code, message, position?}.
"""

from __future__ import annotations

import datetime as dt
import uuid
from pathlib import Path
from typing import Optional

from fastapi import Depends, FastAPI, Request, UploadFile
from fastapi.responses import JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from ..engine.values import format_timestamp
from ..exchange.formatter import UnknownFormatError, export_table, get_formatter
from ..jobs.jobstore import JobRecord, UnknownJobError
from ..jobs.scheduler import UnknownQueueError
from ..jobs.state import JobState, is_terminal
from ..schema.model import Dataset
from ..schema.resolve import ResolutionError, resolve
from ..sql.parser import ParseError, SemanticError, parse
from ..sql.dialect import get_dialect
from .auth import SessionStore, verify_password

EXPOSED_QUEUES = ("quick", "long")


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str,
                 position: Optional[int] = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.position = position

    def body(self) -> dict:
        payload = {"code": self.code, "message": self.message}
        if self.position is not None:
            payload["position"] = self.position
        return payload


class LoginBody(BaseModel):
    user: str
    password: str


class QueryBody(BaseModel):
    sql: str
    queue: str = "quick"
    syntax_check_only: bool = False
    partitions: Optional[int] = None
    dialect: str = "base"


def job_view(record: JobRecord, queue_name: str) -> dict:
    _, results = record.checkpoint
    return {
        "id": record.id,
        "name": record.name,
        "type": record.definition,
        "state": record.state.value,
        "queue": queue_name,
        "submitted": record.properties.get("submitted-at"),
        "started": record.properties.get("started-at"),
        "finished": record.properties.get("finished-at"),
        "error": record.properties.get("error", ""),
        "destination": results.get("execute") or results.get("merge")
        or results.get("destination", ""),
        "branches": {
            key.split(".", 1)[1]: value
            for key, value in sorted(record.properties.items())
            if key.startswith("assigned.")
        },
    }


def create_app(system, session_ttl: float = 8 * 3600.0,
               static_dir: Optional[Path] = None) -> FastAPI:
    app = FastAPI(title="gw data surface", docs_url=None, redoc_url=None)
    sessions = SessionStore(ttl=session_ttl)
    app.state.system = system
    app.state.sessions = sessions

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content=exc.body())

    def authenticate(request: Request) -> str:
        header = request.headers.get("authorization", "")
        if not header.lower().startswith("bearer "):
            raise ApiError(401, "unauthenticated", "missing bearer token")
        session = sessions.lookup(header[7:].strip())
        if session is None:
            raise ApiError(401, "unauthenticated", "invalid or expired token")
        return session.user

    def queue_names() -> dict[str, str]:
        from ..registry.model import EntityType
        return {q.id: q.name
                for q in system.registry.find_by_type(EntityType.QUEUE)}

    # -- sessions ---------------------------------------------------------

    @app.post("/api/sessions")
    def login(body: LoginBody):
        user = system.find_user(body.user)
        if user is None or not verify_password(
                body.password, user.prop("password-hash")):
            raise ApiError(401, "bad-credentials", "unknown user or wrong password")
        session = sessions.create(user.name)
        return {"token": session.token, "user": user.name}

    @app.delete("/api/sessions/{token}")
    def logout(token: str):
        sessions.revoke(token)
        return {"ok": True}

    # -- queries ------------------------------------------------------------

    @app.post("/api/queries")
    def submit_query(body: QueryBody, user: str = Depends(authenticate)):
        if body.queue.lower() not in EXPOSED_QUEUES:
            raise ApiError(400, "unknown-queue",
                           f"queue must be one of {', '.join(EXPOSED_QUEUES)}")
        try:
            dialect = get_dialect(body.dialect)
        except KeyError:
            raise ApiError(400, "unknown-dialect", f"no dialect {body.dialect!r}")
        try:
            tree = parse(body.sql, dialect)
            resolve(tree, system.catalog,
                    system.settings.get("default-dataset"), user=user)
        except ParseError as exc:
            raise ApiError(400, "syntax-error", str(exc), position=exc.offset)
        except SemanticError as exc:
            raise ApiError(400, "semantic-error", str(exc), position=exc.offset)
        except ResolutionError as exc:
            raise ApiError(400, "resolution-error", str(exc))

        if body.syntax_check_only:
            return {"ok": True, "diagnostics": []}

        params = {"sql": body.sql, "user": user, "dialect": body.dialect}
        if body.partitions:
            params["partitions"] = str(body.partitions)
        record = system.scheduler.enqueue("query", params, body.queue, user)
        return JSONResponse(status_code=202, content={"job": record.id})

    # -- jobs ------------------------------------------------------------------

    @app.get("/api/jobs")
    def list_jobs(user: str = Depends(authenticate)):
        names = queue_names()
        records = system.runtime.jobs.jobs_of_user(user)
        records.sort(key=lambda r: r.seq, reverse=True)
        return [job_view(r, names.get(r.queue_id, "")) for r in records]

    def _owned_job(job_id: str, user: str) -> JobRecord:
        try:
            record = system.runtime.jobs.get(job_id)
        except UnknownJobError:
            raise ApiError(404, "unknown-job", f"no job {job_id!r}")
        if record.user.lower() != user.lower():
            raise ApiError(404, "unknown-job", f"no job {job_id!r}")
        return record

    @app.get("/api/jobs/{job_id}")
    def get_job(job_id: str, user: str = Depends(authenticate)):
        record = _owned_job(job_id, user)
        return job_view(record, queue_names().get(record.queue_id, ""))

    @app.delete("/api/jobs/{job_id}")
    def cancel_job(job_id: str, user: str = Depends(authenticate)):
        record = _owned_job(job_id, user)
        system.scheduler.cancel(record.id)
        return JSONResponse(status_code=202, content={"job": record.id})

    # -- MyDB tables ----------------------------------------------------------------

    def _mydb(user: str) -> Dataset:
        mydb = system.catalog.mydb_of(user)
        if mydb is None:
            raise ApiError(404, "no-mydb", f"user {user!r} has no MyDB")
        return mydb

    @app.get("/api/mydb/tables")
    def list_tables(user: str = Depends(authenticate)):
        mydb = _mydb(user)
        backend = system.backends[mydb.location]
        out = []
        for table in system.catalog.get_schema(mydb):
            out.append({
                "name": table.name,
                "rows": backend.table_row_count(mydb.name, table.name),
                "columns": [c.name for c in table.columns],
            })
        return out

    @app.get("/api/mydb/tables/{table}")
    def download_table(table: str, format: str = "csv",
                       user: str = Depends(authenticate)):
        mydb = _mydb(user)
        try:
            get_formatter(format)
        except UnknownFormatError:
            raise ApiError(400, "unknown-format", f"no format {format!r}")
        backend = system.backends[mydb.location]
        try:
            chunks = export_table(backend, mydb.name, table, format)
        except LookupError:
            raise ApiError(404, "unknown-table", f"no table {table!r}")
        return StreamingResponse(chunks, media_type="text/csv", headers={
            "Content-Disposition": f'attachment; filename="{table}.csv"'})

    @app.delete("/api/mydb/tables/{table}")
    def delete_table(table: str, user: str = Depends(authenticate)):
        mydb = _mydb(user)
        backend = system.backends[mydb.location]
        existing = {t.name.lower() for t in backend.introspect_database(mydb.name)}
        if table.lower() not in existing:
            raise ApiError(404, "unknown-table", f"no table {table!r}")
        backend.drop_table(mydb.name, table)
        system.catalog.invalidate(mydb.name)
        return {"ok": True}

    @app.post("/api/mydb/tables")
    async def upload_table(file: UploadFile, table: str, format: str = "csv",
                           user: str = Depends(authenticate)):
        try:
            get_formatter(format)
        except UnknownFormatError:
            raise ApiError(400, "unknown-format", f"no format {format!r}")
        _mydb(user)
        spool = Path(system.runtime.extras.get("spool-dir",
                                               system.state_dir / "spool"))
        spool.mkdir(parents=True, exist_ok=True)
        spool_file = spool / f"upload_{uuid.uuid4().hex}.{format}"
        content = await file.read()
        quota = system.env.mydb_row_quota
        if len(content) > quota * 256:
            raise ApiError(413, "quota-exceeded", "upload exceeds the MyDB quota")
        spool_file.write_bytes(content)
        record = system.scheduler.enqueue(
            "import",
            {"user": user, "table": table, "format": format,
             "file": str(spool_file)},
            "quick", user)
        return JSONResponse(status_code=202, content={"job": record.id})

    # -- schema browsing ---------------------------------------------------------------

    @app.get("/api/schema/datasets")
    def list_datasets(user: str = Depends(authenticate)):
        out = []
        for dataset in system.catalog.datasets():
            if dataset.kind.value == "mydb":
                mine = system.catalog.mydb_of(user)
                if mine is None or dataset.name != mine.name:
                    continue  # other users' MyDBs stay invisible
            if dataset.kind.value == "tempdb":
                continue
            out.append({
                "name": dataset.name,
                "kind": dataset.kind.value,
                "dialect": dataset.dialect_name,
                "location": dataset.location,
            })
        return sorted(out, key=lambda d: d["name"])

    def _visible_dataset(name: str, user: str) -> Dataset:
        try:
            dataset = system.catalog.dataset(name, user=user)
        except Exception:
            raise ApiError(404, "unknown-dataset", f"no dataset {name!r}")
        if dataset.kind.value == "mydb":
            mine = system.catalog.mydb_of(user)
            if mine is None or dataset.name != mine.name:
                raise ApiError(404, "unknown-dataset", f"no dataset {name!r}")
        return dataset

    @app.get("/api/schema/datasets/{name}/tables")
    def list_dataset_tables(name: str, user: str = Depends(authenticate)):
        dataset = _visible_dataset(name, user)
        return [{"name": t.name, "columns": len(t.columns)}
                for t in system.catalog.get_schema(dataset)]

    @app.get("/api/schema/datasets/{name}/tables/{table}")
    def table_detail(name: str, table: str, user: str = Depends(authenticate)):
        dataset = _visible_dataset(name, user)
        schema = system.catalog.table(dataset, table)
        if schema is None:
            raise ApiError(404, "unknown-table", f"no table {table!r} in {name!r}")
        return {
            "name": schema.name,
            "dataset": dataset.name,
            "metadata": {
                "content": schema.metadata.content_id,
                "unit": schema.metadata.unit,
                "summary": schema.metadata.description,
            },
            "columns": [
                {
                    "name": c.name,
                    "type": c.data_type.value,
                    "nullable": c.nullable,
                    "metadata": {
                        "content": c.metadata.content_id,
                        "unit": c.metadata.unit,
                        "summary": c.metadata.description,
                    },
                }
                for c in schema.columns
            ],
        }

    # -- operational ------------------------------------------------------------

    @app.get("/api/health")
    def health():
        return {"ok": True, "time": format_timestamp(dt.datetime.now(dt.timezone.utc))}

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True),
                  name="console")

    return app
