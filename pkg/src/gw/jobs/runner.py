"""Workflow execution for one job: checkpoints, parallel branches, retry.

Suspension is honored between steps only (an in-flight activity completes
first); every activity execution lands in the ledger exactly once per
branch attempt; branches communicate through persisted job state alone.
"""

from __future__ import annotations

import threading
import traceback
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional

from ..engine.bulkcopy import OperationCancelled
from .agent import AgentClient, DelegationError, run_activity_locally
from .jobstore import JobRecord, JobStore
from .model import (
    Activity,
    ActivityContext,
    ActivityKind,
    Branch,
    ParallelGroup,
    WorkflowGraph,
)
from .state import JobState


class SuspendRequested(Exception):
    pass


class BranchExhausted(Exception):
    def __init__(self, branch_id: str, attempts: int, causes: list[str]):
        super().__init__(
            f"branch {branch_id!r} failed after {attempts} attempt(s): "
            + "; ".join(causes))
        self.branch_id = branch_id
        self.causes = causes


class JobRunner:
    def __init__(self, runtime, record: JobRecord, workflow: WorkflowGraph,
                 cancel: threading.Event,
                 assign_node: Callable, release_node: Callable,
                 on_finish: Optional[Callable[[str], None]] = None):
        self.runtime = runtime
        self.record = record
        self.workflow = workflow
        self.cancel = cancel
        self.assign_node = assign_node
        self.release_node = release_node
        self.on_finish = on_finish
        self.jobs: JobStore = runtime.jobs
        self.log = runtime.log

    # -- main loop -----------------------------------------------------------

    def run(self) -> None:
        job = self.record
        done, results = job.checkpoint
        try:
            for step in self.workflow.steps:
                if step.id in done:
                    continue
                self._between_steps(job)
                if isinstance(step, ParallelGroup):
                    self._run_group(step, results)
                else:
                    self._run_activity(step, "main", 0, results, node=None)
                done.append(step.id)
                self.jobs.save_checkpoint(job.id, done, results)
            self.jobs.try_transition(job.id, JobState.COMPLETED)
            self.log.log("info", "jobs", f"job {job.name} completed", job_id=job.id)
        except SuspendRequested:
            self.jobs.save_checkpoint(job.id, done, results)
            self.jobs.try_transition(job.id, JobState.SUSPENDED)
            self.jobs.set_properties(job.id, {"suspend-requested": ""})
            self.log.log("info", "jobs", f"job {job.name} suspended", job_id=job.id)
        except OperationCancelled:
            self.jobs.try_transition(job.id, JobState.CANCELLED)
            self.log.log("info", "jobs", f"job {job.name} cancelled", job_id=job.id)
        except Exception as exc:
            self.jobs.try_transition(job.id, JobState.FAILED,
                                     extra={"error": str(exc)})
            self.log.log("error", "jobs", f"job {job.name} failed: {exc}",
                         job_id=job.id, detail=traceback.format_exc())
        finally:
            if self.on_finish is not None:
                self.on_finish(job.id)

    def _between_steps(self, job: JobRecord) -> None:
        if self.cancel.is_set():
            raise OperationCancelled(f"job {job.name} cancelled")
        fresh = self.jobs.get(job.id)
        if fresh.cancel_requested:
            raise OperationCancelled(f"job {job.name} cancelled")
        if fresh.suspend_requested:
            raise SuspendRequested()

    # -- activities ------------------------------------------------------------

    def _run_activity(self, activity: Activity, branch_id: str, attempt: int,
                      results: dict, node: Optional[str]) -> None:
        job = self.record
        seq = self.log.ledger_start(job.id, branch_id, attempt, activity.id)
        ctx = ActivityContext(
            runtime=self.runtime, job=job, branch_id=branch_id, attempt=attempt,
            cancel=self.cancel, node=node, results=results)
        try:
            if activity.run is not None:
                out = activity.run(ctx)
                if out is not None:
                    results[activity.id] = str(out)
            else:
                params, _payload = self._execute_kind(activity, ctx)
                for key, value in params.items():
                    results[f"{activity.id}.{key}"] = value
            self.log.ledger_finish(seq, "completed")
        except OperationCancelled:
            self.log.ledger_finish(seq, "cancelled")
            raise
        except Exception:
            self.log.ledger_finish(seq, "failed")
            raise

    def _execute_kind(self, activity: Activity, ctx: ActivityContext):
        """Kind-based activities run in the assigned node's agent when one
        is deployed; otherwise in-process.  Results are identical either way."""
        ctx.check_cancel()
        address = None
        if activity.delegate == "assigned-node" and ctx.node is not None:
            address = self.runtime.agents.get(ctx.node)
        if address is not None:
            client = AgentClient(*address)
            return client.call(activity.kind.value, activity.params)
        return run_activity_locally(activity.kind.value, activity.params)

    # -- parallel groups with retry ----------------------------------------------

    def _run_group(self, group: ParallelGroup, results: dict) -> None:
        errors: list[BranchExhausted] = []
        cancelled = False
        with ThreadPoolExecutor(max_workers=max(2, len(group.branches)),
                                thread_name_prefix=f"branch-{group.id}") as pool:
            futures = {
                pool.submit(self._run_branch_with_retry, branch, results): branch
                for branch in group.branches
            }
            for future in futures:
                try:
                    future.result()
                except OperationCancelled:
                    cancelled = True
                except BranchExhausted as exc:
                    errors.append(exc)
        if cancelled:
            raise OperationCancelled(f"job {self.record.name} cancelled")
        if errors:
            raise BranchExhausted(
                ",".join(e.branch_id for e in errors),
                sum(len(e.causes) for e in errors),
                [c for e in errors for c in e.causes])

    def _run_branch_with_retry(self, branch: Branch, shared_results: dict) -> None:
        job = self.record
        causes: list[str] = []
        excluded: list[str] = []
        for attempt in range(branch.retry_limit + 1):
            node = None
            if branch.required_datasets:
                node = self.assign_node(branch.required_datasets, excluded)
                self.jobs.set_properties(job.id, {
                    f"assigned.{branch.id}": node,
                    f"attempts.{branch.id}": str(attempt + 1),
                })
            try:
                local: dict = {}
                for activity in branch.activities:
                    if self.cancel.is_set():
                        raise OperationCancelled(f"job {job.name} cancelled")
                    self._run_activity(activity, branch.id, attempt, local, node)
                shared_results.update(local)
                return
            except OperationCancelled:
                raise
            except Exception as exc:
                causes.append(f"attempt {attempt + 1}: {exc}")
                self.log.log(
                    "warning", "jobs",
                    f"branch {branch.id} attempt {attempt + 1} failed on "
                    f"{node or 'controller'}: {exc}", job_id=job.id)
                if node is not None:
                    excluded.append(node)
            finally:
                if node is not None:
                    self.release_node(node)
        raise BranchExhausted(branch.id, branch.retry_limit + 1, causes)
