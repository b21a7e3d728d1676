"""Queued, persistent, cancellable workflow execution."""

from . import builtin  # registers the built-in job definitions
from .agent import AgentClient, AgentServer, DelegationError, RemoteActivityError
from .jobstore import (
    IllegalJobStateError,
    JobRecord,
    JobStore,
    UnknownJobError,
)
from .logging import LedgerEntry, LogEvent, LogStore
from .model import (
    Activity,
    ActivityContext,
    ActivityKind,
    Branch,
    ParallelGroup,
    UnknownDefinitionError,
    WorkflowGraph,
    build_workflow,
    register_workflow,
)
from .runner import BranchExhausted, JobRunner
from .scheduler import (
    DEFAULT_QUEUES,
    JobRuntime,
    NoHostingNodeError,
    Scheduler,
    UnknownQueueError,
    ensure_default_queues,
    find_queue,
)
from .state import JobState, LEGAL_TRANSITIONS, TERMINAL_STATES, is_terminal

__all__ = [
    "AgentClient", "AgentServer", "DelegationError", "RemoteActivityError",
    "IllegalJobStateError", "JobRecord", "JobStore", "UnknownJobError",
    "LedgerEntry", "LogEvent", "LogStore",
    "Activity", "ActivityContext", "ActivityKind", "Branch", "ParallelGroup",
    "UnknownDefinitionError", "WorkflowGraph", "build_workflow", "register_workflow",
    "BranchExhausted", "JobRunner",
    "DEFAULT_QUEUES", "JobRuntime", "NoHostingNodeError", "Scheduler",
    "UnknownQueueError", "ensure_default_queues", "find_queue",
    "JobState", "LEGAL_TRANSITIONS", "TERMINAL_STATES", "is_terminal",
]
