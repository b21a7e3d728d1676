"""The job scheduler: the queue system and the cluster's traffic control.

One polling loop per controller: it starts eligible queued jobs (FIFO per
queue, under each queue's outstanding ceiling), flips cancel requests,
enforces queue timeouts, and assigns worker nodes to branches observing
data co-location.  It is the single writer of job states.
"""

from __future__ import annotations

import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from ..registry.model import Entity, EntityType
from ..registry.store import RegistryStore
from .jobstore import IllegalJobStateError, JobRecord, JobStore, UnknownJobError
from .logging import LogStore
from .model import UnknownDefinitionError, build_workflow
from .runner import JobRunner
from .state import JobState, is_terminal

DEFAULT_POLL_PERIOD = 0.25

# name, timeout seconds, max outstanding
DEFAULT_QUEUES = (
    ("maintenance", 3600.0, 4),
    ("quick", 60.0, 4),
    ("long", 28800.0, 4),
)


class UnknownQueueError(Exception):
    pass


class NoHostingNodeError(Exception):
    pass


@dataclass
class JobRuntime:
    """Facilities shared by the scheduler, runners, and workflow builders."""

    registry: RegistryStore
    jobs: JobStore
    log: LogStore
    env: object = None      # engine ExecEnv
    catalog: object = None
    view: object = None
    agents: dict = field(default_factory=dict)  # node id -> (host, port)
    extras: dict = field(default_factory=dict)


def ensure_default_queues(registry: RegistryStore, cluster: Entity) -> None:
    for name, timeout, outstanding in DEFAULT_QUEUES:
        if registry.child_by_name(cluster.id, name, EntityType.QUEUE) is None:
            registry.create_entity(EntityType.QUEUE, name, cluster.id, {
                "timeout": repr(timeout),
                "max-outstanding": str(outstanding),
            })


def find_queue(registry: RegistryStore, name: str) -> Entity:
    for queue in registry.find_by_type(EntityType.QUEUE):
        if queue.name.lower() == name.lower():
            return queue
    raise UnknownQueueError(f"no queue named {name!r}")


class Scheduler:
    def __init__(self, runtime: JobRuntime, poll_period: float = DEFAULT_POLL_PERIOD,
                 max_workers: int = 16):
        self.runtime = runtime
        self.poll_period = poll_period
        self._pool = ThreadPoolExecutor(max_workers=max_workers,
                                        thread_name_prefix="job")
        self._live: dict[str, threading.Event] = {}
        self._loads: dict[str, int] = {}
        self._lock = threading.RLock()
        self._recovered = False
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None

    # -- public API ------------------------------------------------------------

    def enqueue(self, definition: str, params: dict[str, str], queue_name: str,
                user: str) -> JobRecord:
        from .model import known_definitions

        if definition.lower() not in known_definitions():
            raise UnknownDefinitionError(f"no job definition {definition!r}")
        queue = find_queue(self.runtime.registry, queue_name)
        record = self.runtime.jobs.enqueue(definition, params, queue, user)
        self.runtime.log.log("info", "scheduler",
                             f"job {record.name} enqueued to {queue.name}",
                             job_id=record.id)
        return record

    def cancel(self, job_id: str) -> None:
        record = self.runtime.jobs.get(job_id)
        if is_terminal(record.state):
            self.runtime.log.log("warning", "scheduler",
                                 f"cancel of terminal job {record.name} ignored",
                                 job_id=job_id)
            return
        self.runtime.jobs.set_properties(job_id, {"cancel-requested": "1"})
        with self._lock:
            event = self._live.get(job_id)
        if event is not None:
            event.set()  # stop signal to all running branches

    def suspend(self, job_id: str) -> None:
        self.runtime.jobs.require_state(job_id, JobState.RUNNING)
        self.runtime.jobs.set_properties(job_id, {"suspend-requested": "1"})

    def resume(self, job_id: str) -> None:
        self.runtime.jobs.require_state(job_id, JobState.SUSPENDED)
        self.runtime.jobs.set_properties(job_id, {"resume-requested": "1"})

    # -- the polling loop ---------------------------------------------------------

    def start(self) -> "Scheduler":
        self._stop.clear()
        self._thread = threading.Thread(target=self._loop, name="scheduler",
                                        daemon=True)
        self._thread.start()
        return self

    def stop(self, drain: bool = False, grace: float = 5.0) -> None:
        if drain:
            deadline = time.time() + grace
            while time.time() < deadline and self._any_active():
                time.sleep(self.poll_period)
            for record in self.runtime.jobs.all_jobs():
                if not is_terminal(record.state):
                    self.cancel(record.id)
            deadline = time.time() + grace
            while time.time() < deadline and self._any_active():
                self.step()
                time.sleep(self.poll_period)
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=grace)
        self._pool.shutdown(wait=False)

    def _any_active(self) -> bool:
        return any(not is_terminal(r.state) for r in self.runtime.jobs.all_jobs())

    def _loop(self) -> None:
        while not self._stop.is_set():
            try:
                self.step()
            except Exception as exc:  # individual failures never abort the loop
                self.runtime.log.log("error", "scheduler",
                                     f"scheduler step failed: {exc}")
            self._stop.wait(self.poll_period)

    def step(self) -> None:
        """One poll: recovery, cancellations, timeouts, dispatch."""
        with self._lock:
            if not self._recovered:
                self._recover()
                self._recovered = True
            self._process_cancel_requests()
            self._enforce_timeouts()
            self._dispatch_eligible()

    # -- poll phases -------------------------------------------------------------

    def _recover(self) -> None:
        self.runtime.log.mark_interrupted()
        for record in self.runtime.jobs.all_jobs():
            if record.id in self._live:
                continue
            if record.state is JobState.RUNNING:
                # controller died mid-job: resume from the last checkpoint
                self.runtime.log.log(
                    "info", "scheduler",
                    f"recovering job {record.name} from checkpoint",
                    job_id=record.id)
                self._launch(record)
            elif record.state is JobState.CANCELLING:
                # no activities survive a crash; finish the cancellation
                self.runtime.jobs.try_transition(record.id, JobState.CANCELLED)

    def _process_cancel_requests(self) -> None:
        for record in self.runtime.jobs.all_jobs():
            if not record.cancel_requested or is_terminal(record.state):
                continue
            if record.state is JobState.QUEUED:
                self.runtime.jobs.try_transition(record.id, JobState.CANCELLED)
            elif record.state is JobState.SUSPENDED:
                self.runtime.jobs.try_transition(record.id, JobState.CANCELLED)
            elif record.state is JobState.RUNNING:
                if self.runtime.jobs.try_transition(record.id, JobState.CANCELLING):
                    event = self._live.get(record.id)
                    if event is not None:
                        event.set()
            elif record.state is JobState.CANCELLING:
                if record.id not in self._live:
                    self.runtime.jobs.try_transition(record.id, JobState.CANCELLED)

    def _enforce_timeouts(self) -> None:
        now = time.time()
        for queue in self.runtime.registry.find_by_type(EntityType.QUEUE):
            timeout = float(queue.prop("timeout", "3600"))
            for record in self.runtime.jobs.jobs_in_queue(queue.id):
                if record.state is not JobState.RUNNING:
                    continue
                started = record.properties.get("started-clock")
                if started is None or now - float(started) <= timeout:
                    continue
                if self.runtime.jobs.try_transition(
                        record.id, JobState.TIMED_OUT,
                        extra={"error": f"queue timeout of {timeout}s exceeded"}):
                    event = self._live.get(record.id)
                    if event is not None:
                        event.set()  # tear down the job's activities
                    self.runtime.log.log(
                        "warning", "scheduler",
                        f"job {record.name} timed out after {timeout}s",
                        job_id=record.id)

    def _dispatch_eligible(self) -> None:
        for queue in self.runtime.registry.find_by_type(EntityType.QUEUE):
            ceiling = int(queue.prop("max-outstanding", "4"))
            jobs = self.runtime.jobs.jobs_in_queue(queue.id)
            occupied = sum(1 for j in jobs if j.state in
                           (JobState.RUNNING, JobState.CANCELLING))
            eligible = [
                j for j in jobs
                if (j.state is JobState.QUEUED and not j.cancel_requested)
                or (j.state is JobState.SUSPENDED and j.resume_requested
                    and not j.cancel_requested)
            ]
            for record in eligible[:max(0, ceiling - occupied)]:
                self._launch(record)
                occupied += 1

    def _launch(self, record: JobRecord) -> None:
        runtime = self.runtime
        try:
            workflow = build_workflow(record.definition, record.params, runtime)
        except Exception as exc:
            if record.state is not JobState.RUNNING:
                runtime.jobs.try_transition(record.id, JobState.RUNNING)
            runtime.jobs.try_transition(record.id, JobState.FAILED,
                                        extra={"error": str(exc)})
            runtime.log.log("error", "scheduler",
                            f"job {record.name} failed to build: {exc}",
                            job_id=record.id)
            return

        if record.state in (JobState.QUEUED, JobState.SUSPENDED):
            if not runtime.jobs.try_transition(record.id, JobState.RUNNING):
                return
            runtime.jobs.set_properties(record.id, {"resume-requested": ""})

        cancel = threading.Event()
        fresh = runtime.jobs.get(record.id)
        runner = JobRunner(
            runtime, fresh, workflow, cancel,
            assign_node=self.assign_branch_node,
            release_node=self._release_node,
            on_finish=self._on_finish)
        self._live[record.id] = cancel
        self._pool.submit(runner.run)

    def _on_finish(self, job_id: str) -> None:
        with self._lock:
            self._live.pop(job_id, None)

    # -- branch/node assignment -----------------------------------------------------

    def assign_branch_node(self, required_datasets, excluded=()) -> str:
        """Least-loaded node hosting every required dataset; ties break by id."""
        if self.runtime.view is None:
            raise NoHostingNodeError("no cluster view configured")
        candidates: Optional[set[str]] = None
        for dataset in required_datasets:
            hosts = set(self.runtime.view.hosts(dataset))
            candidates = hosts if candidates is None else candidates & hosts
        if not candidates:
            raise NoHostingNodeError(
                f"no node hosts all of {', '.join(required_datasets)}")
        preferred = [n for n in candidates if n not in set(excluded)]
        pool = preferred or sorted(candidates)
        with self._lock:
            chosen = min(pool, key=lambda n: (self._loads.get(n, 0), n))
            self._loads[chosen] = self._loads.get(chosen, 0) + 1
        return chosen

    def _release_node(self, node: str) -> None:
        with self._lock:
            current = self._loads.get(node, 0)
            self._loads[node] = max(0, current - 1)

    def branch_loads(self) -> dict[str, int]:
        with self._lock:
            return dict(self._loads)
