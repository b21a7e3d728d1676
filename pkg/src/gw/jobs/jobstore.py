"""Persistent job instances.

Jobs are JobInstance entities under Queue entities in the registry.  All
state transitions funnel through one writer path that checks the legal
transition table and records every applied transition in the same
transaction, so an audit replay can never observe an illegal step.
"""

from __future__ import annotations

import datetime as dt
import json
import sqlite3
import time
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import Optional
from xml.sax.saxutils import escape, quoteattr

from ..registry.model import Entity, EntityType
from ..registry.store import RegistryStore, UnknownEntityError
from .state import JobState, can_transition, is_terminal


class UnknownJobError(Exception):
    pass


class IllegalJobStateError(Exception):
    pass


def params_to_xml(params: dict[str, str]) -> str:
    parts = ["<params>"]
    for key in sorted(params):
        parts.append(f"<param name={quoteattr(key)}>{escape(str(params[key]))}</param>")
    parts.append("</params>")
    return "".join(parts)


def params_from_xml(text: str) -> dict[str, str]:
    if not text:
        return {}
    root = ET.fromstring(text)
    return {el.attrib["name"]: el.text or "" for el in root}


def checkpoint_to_xml(done: list[str], results: dict[str, str]) -> str:
    parts = ["<checkpoint>"]
    for step in done:
        parts.append(f"<done>{escape(step)}</done>")
    for key in sorted(results):
        parts.append(f"<result name={quoteattr(key)}>{escape(results[key])}</result>")
    parts.append("</checkpoint>")
    return "".join(parts)


def checkpoint_from_xml(text: str) -> tuple[list[str], dict[str, str]]:
    if not text:
        return [], {}
    root = ET.fromstring(text)
    done = [el.text or "" for el in root.findall("done")]
    results = {el.attrib["name"]: el.text or "" for el in root.findall("result")}
    return done, results


@dataclass
class JobRecord:
    id: str
    name: str
    definition: str
    queue_id: str
    user: str
    state: JobState
    params: dict[str, str]
    seq: int
    version: int
    properties: dict[str, str]

    @property
    def cancel_requested(self) -> bool:
        return self.properties.get("cancel-requested") == "1"

    @property
    def suspend_requested(self) -> bool:
        return self.properties.get("suspend-requested") == "1"

    @property
    def resume_requested(self) -> bool:
        return self.properties.get("resume-requested") == "1"

    @property
    def checkpoint(self) -> tuple[list[str], dict[str, str]]:
        return checkpoint_from_xml(self.properties.get("checkpoint", ""))


def _now_iso() -> str:
    return dt.datetime.now(dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


class JobStore:
    """Job persistence over the registry database."""

    def __init__(self, registry: RegistryStore):
        self.registry = registry
        conn = self._connect()
        try:
            conn.execute(
                "CREATE TABLE IF NOT EXISTS job_seq (n INTEGER NOT NULL)")
            if conn.execute("SELECT COUNT(*) FROM job_seq").fetchone()[0] == 0:
                conn.execute("INSERT INTO job_seq (n) VALUES (0)")
            conn.commit()
        finally:
            conn.close()

    def _connect(self) -> sqlite3.Connection:
        return self.registry._connect()

    # -- enqueue -----------------------------------------------------------

    def enqueue(self, definition: str, params: dict[str, str], queue: Entity,
                user: str) -> JobRecord:
        conn = self._connect()
        try:
            conn.execute("UPDATE job_seq SET n = n + 1")
            seq = conn.execute("SELECT n FROM job_seq").fetchone()[0]
            conn.commit()
        finally:
            conn.close()
        name = f"job{seq:08d}"
        entity = self.registry.create_entity(
            EntityType.JOB_INSTANCE, name, queue.id, {
                "definition": definition,
                "params": params_to_xml(params),
                "user": user,
                "state": JobState.QUEUED.value,
                "seq": str(seq),
                "submitted-at": _now_iso(),
            })
        return self._record(entity)

    def _record(self, entity: Entity) -> JobRecord:
        return JobRecord(
            id=entity.id,
            name=entity.name,
            definition=entity.prop("definition"),
            queue_id=entity.parent or "",
            user=entity.prop("user"),
            state=JobState(entity.prop("state", "queued")),
            params=params_from_xml(entity.prop("params")),
            seq=int(entity.prop("seq", "0")),
            version=entity.version,
            properties=dict(entity.properties),
        )

    def get(self, job_id: str) -> JobRecord:
        try:
            return self._record(self.registry.get_entity(job_id))
        except UnknownEntityError:
            raise UnknownJobError(f"no job {job_id!r}") from None

    def jobs_in_queue(self, queue_id: str) -> list[JobRecord]:
        jobs = [self._record(e) for e in
                self.registry.children(queue_id, EntityType.JOB_INSTANCE)]
        return sorted(jobs, key=lambda j: j.seq)

    def all_jobs(self) -> list[JobRecord]:
        return sorted((self._record(e) for e in
                       self.registry.find_by_type(EntityType.JOB_INSTANCE)),
                      key=lambda j: j.seq)

    def jobs_of_user(self, user: str) -> list[JobRecord]:
        return [j for j in self.all_jobs() if j.user.lower() == user.lower()]

    # -- single-writer state transitions ------------------------------------

    def try_transition(self, job_id: str, to_state: JobState,
                       extra: Optional[dict[str, str]] = None) -> bool:
        """Apply a transition if it is legal from the current state.

        Returns False (a no-op) when the job is already terminal or the
        transition is not legal; the transition log records applied
        transitions only, in the same transaction as the entity update.
        """
        conn = self._connect()
        try:
            conn.execute("BEGIN IMMEDIATE")
            row = conn.execute(
                "SELECT properties, version FROM entities WHERE id = ?",
                (job_id,)).fetchone()
            if row is None:
                conn.rollback()
                raise UnknownJobError(f"no job {job_id!r}")
            props = json.loads(row[0])
            current = JobState(props.get("state", "queued"))
            if is_terminal(current) or not can_transition(current, to_state):
                conn.rollback()
                return False
            props["state"] = to_state.value
            if to_state is JobState.RUNNING and "started-at" not in props:
                props["started-at"] = _now_iso()
                props["started-clock"] = repr(time.time())
            if is_terminal(to_state):
                props["finished-at"] = _now_iso()
            for key, value in (extra or {}).items():
                props[key] = value
            conn.execute(
                "UPDATE entities SET properties = ?, version = version + 1, "
                "modified = ? WHERE id = ?",
                (json.dumps(props, sort_keys=True), _now_iso(), job_id))
            conn.execute(
                "INSERT INTO job_transitions (job_id, from_state, to_state, at) "
                "VALUES (?, ?, ?, ?)",
                (job_id, current.value, to_state.value, _now_iso()))
            conn.commit()
            return True
        finally:
            conn.close()

    def require_state(self, job_id: str, *states: JobState) -> JobRecord:
        record = self.get(job_id)
        if record.state not in states:
            raise IllegalJobStateError(
                f"job {record.name} is {record.state.value}, expected "
                f"{'/'.join(s.value for s in states)}")
        return record

    # -- flags and checkpoints (non-transition property writes) ---------------

    def set_properties(self, job_id: str, updates: dict[str, str]) -> None:
        """Read-modify-write with retry; never touches the state property."""
        for _ in range(50):
            conn = self._connect()
            try:
                conn.execute("BEGIN IMMEDIATE")
                row = conn.execute(
                    "SELECT properties FROM entities WHERE id = ?",
                    (job_id,)).fetchone()
                if row is None:
                    conn.rollback()
                    raise UnknownJobError(f"no job {job_id!r}")
                props = json.loads(row[0])
                props.update(updates)
                conn.execute(
                    "UPDATE entities SET properties = ?, version = version + 1, "
                    "modified = ? WHERE id = ?",
                    (json.dumps(props, sort_keys=True), _now_iso(), job_id))
                conn.commit()
                return
            except sqlite3.OperationalError:
                time.sleep(0.01)
            finally:
                conn.close()
        raise RuntimeError(f"could not update job {job_id!r} properties")

    def save_checkpoint(self, job_id: str, done: list[str],
                        results: dict[str, str]) -> None:
        self.set_properties(job_id, {"checkpoint": checkpoint_to_xml(done, results)})
