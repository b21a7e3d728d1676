"""Structured logging and the activity ledger.

Both live in the controller's registry database file: one persistence
path, queryable by job id and time range.  Events below the configured
severity threshold are dropped at the door.
"""

from __future__ import annotations

import datetime as dt
import sqlite3
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Optional


SEVERITIES = ("debug", "info", "warning", "error")


@dataclass
class LogEvent:
    seq: int
    timestamp: str
    severity: str
    source: str
    job_id: Optional[str]
    message: str
    detail: str = ""


@dataclass
class LedgerEntry:
    seq: int
    job_id: str
    branch: str
    attempt: int
    activity: str
    started: str
    finished: str
    status: str  # running | completed | failed | interrupted | cancelled


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


class LogStore:
    def __init__(self, path: Path | str, threshold: str = "debug"):
        self.path = Path(path)
        self.threshold = threshold
        self._lock = threading.Lock()
        bootstrap = sqlite3.connect(self.path)
        bootstrap.execute("PRAGMA journal_mode=WAL")
        bootstrap.close()
        conn = self._connect()
        try:
            conn.executescript(
                """
                CREATE TABLE IF NOT EXISTS log_events (
                    seq INTEGER PRIMARY KEY AUTOINCREMENT,
                    timestamp TEXT NOT NULL,
                    severity TEXT NOT NULL,
                    source TEXT NOT NULL,
                    job_id TEXT,
                    message TEXT NOT NULL,
                    detail TEXT NOT NULL DEFAULT ''
                );
                CREATE INDEX IF NOT EXISTS ix_log_job ON log_events(job_id);
                CREATE TABLE IF NOT EXISTS activity_ledger (
                    seq INTEGER PRIMARY KEY AUTOINCREMENT,
                    job_id TEXT NOT NULL,
                    branch TEXT NOT NULL,
                    attempt INTEGER NOT NULL,
                    activity TEXT NOT NULL,
                    started TEXT NOT NULL,
                    finished TEXT NOT NULL DEFAULT '',
                    status TEXT NOT NULL
                );
                CREATE INDEX IF NOT EXISTS ix_ledger_job ON activity_ledger(job_id);
                CREATE TABLE IF NOT EXISTS job_transitions (
                    seq INTEGER PRIMARY KEY AUTOINCREMENT,
                    job_id TEXT NOT NULL,
                    from_state TEXT NOT NULL,
                    to_state TEXT NOT NULL,
                    at TEXT NOT NULL
                );
                """
            )
            conn.commit()
        finally:
            conn.close()

    def _connect(self) -> sqlite3.Connection:
        conn = sqlite3.connect(self.path, timeout=30, check_same_thread=False)
        conn.execute("PRAGMA busy_timeout=30000")
        return conn

    # -- events -----------------------------------------------------------

    def log(self, severity: str, source: str, message: str,
            job_id: Optional[str] = None, detail: str = "") -> None:
        if SEVERITIES.index(severity) < SEVERITIES.index(self.threshold):
            return
        conn = self._connect()
        try:
            conn.execute(
                "INSERT INTO log_events (timestamp, severity, source, job_id, "
                "message, detail) VALUES (?, ?, ?, ?, ?, ?)",
                (_now(), severity, source, job_id, message, detail))
            conn.commit()
        finally:
            conn.close()

    def query_log(self, job_id: Optional[str] = None,
                  since: Optional[str] = None, until: Optional[str] = None,
                  severity: Optional[str] = None) -> list[LogEvent]:
        clauses, args = [], []
        if job_id is not None:
            clauses.append("job_id = ?")
            args.append(job_id)
        if since is not None:
            clauses.append("timestamp >= ?")
            args.append(since)
        if until is not None:
            clauses.append("timestamp <= ?")
            args.append(until)
        if severity is not None:
            clauses.append("severity = ?")
            args.append(severity)
        where = f"WHERE {' AND '.join(clauses)}" if clauses else ""
        conn = self._connect()
        try:
            rows = conn.execute(
                f"SELECT seq, timestamp, severity, source, job_id, message, detail "
                f"FROM log_events {where} ORDER BY seq", args).fetchall()
            return [LogEvent(*r) for r in rows]
        finally:
            conn.close()

    # -- activity ledger ----------------------------------------------------

    def ledger_start(self, job_id: str, branch: str, attempt: int,
                     activity: str) -> int:
        conn = self._connect()
        try:
            cur = conn.execute(
                "INSERT INTO activity_ledger (job_id, branch, attempt, activity, "
                "started, status) VALUES (?, ?, ?, ?, ?, 'running')",
                (job_id, branch, attempt, activity, _now()))
            conn.commit()
            return cur.lastrowid
        finally:
            conn.close()

    def ledger_finish(self, seq: int, status: str) -> None:
        conn = self._connect()
        try:
            conn.execute(
                "UPDATE activity_ledger SET finished = ?, status = ? WHERE seq = ?",
                (_now(), status, seq))
            conn.commit()
        finally:
            conn.close()

    def mark_interrupted(self, job_id: Optional[str] = None) -> int:
        """Flip still-running ledger rows to interrupted (crash recovery)."""
        conn = self._connect()
        try:
            if job_id is None:
                cur = conn.execute(
                    "UPDATE activity_ledger SET status = 'interrupted', finished = ? "
                    "WHERE status = 'running'", (_now(),))
            else:
                cur = conn.execute(
                    "UPDATE activity_ledger SET status = 'interrupted', finished = ? "
                    "WHERE status = 'running' AND job_id = ?", (_now(), job_id))
            conn.commit()
            return cur.rowcount
        finally:
            conn.close()

    def ledger_entries(self, job_id: Optional[str] = None) -> list[LedgerEntry]:
        conn = self._connect()
        try:
            if job_id is None:
                rows = conn.execute(
                    "SELECT seq, job_id, branch, attempt, activity, started, "
                    "finished, status FROM activity_ledger ORDER BY seq").fetchall()
            else:
                rows = conn.execute(
                    "SELECT seq, job_id, branch, attempt, activity, started, "
                    "finished, status FROM activity_ledger WHERE job_id = ? "
                    "ORDER BY seq", (job_id,)).fetchall()
            return [LedgerEntry(*r) for r in rows]
        finally:
            conn.close()

    # -- transitions (written by JobStore in its own transaction) ---------------

    def transitions(self, job_id: Optional[str] = None) -> list[tuple[str, str, str]]:
        conn = self._connect()
        try:
            if job_id is None:
                rows = conn.execute(
                    "SELECT job_id, from_state, to_state FROM job_transitions "
                    "ORDER BY seq").fetchall()
            else:
                rows = conn.execute(
                    "SELECT job_id, from_state, to_state FROM job_transitions "
                    "WHERE job_id = ? ORDER BY seq", (job_id,)).fetchall()
            return rows
        finally:
            conn.close()
