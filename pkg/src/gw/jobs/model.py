"""Workflow model: activities, branches, parallel groups.

A workflow is a sequence of steps; each step is a single activity or a
parallel group of branches that all join before the next step.  The graph
is acyclic by construction.  Job definitions are code-registered builders
parameterized at enqueue time; their logic is fixed, only parameters vary.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Union


class ActivityKind(Enum):
    RUN_STATEMENT = "run-statement"
    BULK_COPY = "bulk-copy"
    CREATE_TEMP = "create-temp"
    DROP_TEMP = "drop-temp"
    IMPORT_FILE = "import-file"
    EXPORT_TABLE = "export-table"
    PARTITION_BRANCH = "partition-branch"
    MERGE_RESULTS = "merge-results"
    CUSTOM = "custom"


DELEGATE_CONTROLLER = "controller"
DELEGATE_ASSIGNED_NODE = "assigned-node"


@dataclass
class ActivityContext:
    """Everything an activity may touch while it runs."""

    runtime: object  # the deployment facilities (engine env, catalog, agents)
    job: object      # JobRecord
    branch_id: str
    attempt: int
    cancel: threading.Event
    node: Optional[str] = None  # assigned node for delegated branches
    results: dict[str, str] = field(default_factory=dict)

    def check_cancel(self) -> None:
        if self.cancel.is_set():
            from ..engine.bulkcopy import OperationCancelled
            raise OperationCancelled(f"job {self.job.name} cancelled")

    def log(self, severity: str, message: str, detail: str = "") -> None:
        self.runtime.log.log(severity, "jobs", message,
                             job_id=self.job.id, detail=detail)


@dataclass
class Activity:
    id: str
    kind: ActivityKind = ActivityKind.CUSTOM
    run: Optional[Callable[[ActivityContext], Optional[str]]] = None
    params: dict[str, str] = field(default_factory=dict)
    delegate: str = DELEGATE_CONTROLLER


@dataclass
class Branch:
    id: str
    activities: list[Activity]
    retry_limit: int = 0
    required_datasets: tuple[str, ...] = ()


@dataclass
class ParallelGroup:
    id: str
    branches: list[Branch]


Step = Union[Activity, ParallelGroup]


@dataclass
class WorkflowGraph:
    steps: list[Step]

    def validate(self) -> None:
        seen: set[str] = set()
        for step in self.steps:
            ids = [step.id]
            if isinstance(step, ParallelGroup):
                ids += [b.id for b in step.branches]
                ids += [a.id for b in step.branches for a in b.activities]
            for i in ids:
                if i in seen:
                    raise ValueError(f"duplicate workflow step id {i!r}")
                seen.add(i)


# builder(params, runtime) -> WorkflowGraph
WorkflowBuilder = Callable[[dict, object], WorkflowGraph]

_BUILDERS: dict[str, WorkflowBuilder] = {}


class UnknownDefinitionError(Exception):
    pass


def register_workflow(name: str, builder: WorkflowBuilder) -> None:
    _BUILDERS[name.lower()] = builder


def build_workflow(name: str, params: dict, runtime) -> WorkflowGraph:
    builder = _BUILDERS.get(name.lower())
    if builder is None:
        raise UnknownDefinitionError(f"no job definition {name!r}")
    graph = builder(params, runtime)
    graph.validate()
    return graph


def known_definitions() -> list[str]:
    return sorted(_BUILDERS)
