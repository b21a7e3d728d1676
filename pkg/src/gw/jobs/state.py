"""Job state machine."""

from __future__ import annotations

from enum import Enum


class JobState(Enum):
    QUEUED = "queued"
    RUNNING = "running"
    SUSPENDED = "suspended"
    CANCELLING = "cancelling"
    CANCELLED = "cancelled"
    FAILED = "failed"
    COMPLETED = "completed"
    TIMED_OUT = "timed-out"


TERMINAL_STATES = frozenset(
    {JobState.CANCELLED, JobState.FAILED, JobState.COMPLETED, JobState.TIMED_OUT})

# queued and suspended jobs cancel directly (nothing is running to tear down);
# running jobs pass through cancelling while branches stop.
LEGAL_TRANSITIONS: dict[JobState, frozenset[JobState]] = {
    JobState.QUEUED: frozenset({JobState.RUNNING, JobState.CANCELLED}),
    JobState.RUNNING: frozenset({
        JobState.COMPLETED, JobState.FAILED, JobState.SUSPENDED,
        JobState.CANCELLING, JobState.TIMED_OUT}),
    JobState.CANCELLING: frozenset({JobState.CANCELLED}),
    JobState.SUSPENDED: frozenset({JobState.RUNNING, JobState.CANCELLED}),
    JobState.CANCELLED: frozenset(),
    JobState.FAILED: frozenset(),
    JobState.COMPLETED: frozenset(),
    JobState.TIMED_OUT: frozenset(),
}


def is_terminal(state: JobState) -> bool:
    return state in TERMINAL_STATES


def can_transition(from_state: JobState, to_state: JobState) -> bool:
    return to_state in LEGAL_TRANSITIONS[from_state]
