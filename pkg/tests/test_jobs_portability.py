"""Suspension portability and crash recovery around checkpoints."""

import os
import signal
import subprocess
import sys
import time
from pathlib import Path

import pytest

from gw.jobs import (
    JobRuntime,
    JobState,
    JobStore,
    LogStore,
    Scheduler,
    ensure_default_queues,
)
from gw.registry import EntityType, RegistryStore, export_xml, import_xml

HERE = Path(__file__).parent

# the sleep workflow these jobs run is registered by importing the module
sys.path.insert(0, str(HERE))
from stress_controller import sleep_workflow  # noqa: E402,F401


def _runtime(path):
    registry = RegistryStore(path)
    roots = registry.roots()
    if roots:
        cluster = roots[0]
    else:
        cluster = registry.create_entity(EntityType.CLUSTER, "c1")
    ensure_default_queues(registry, cluster)
    return JobRuntime(registry=registry, jobs=JobStore(registry),
                      log=LogStore(path))


def _wait_state(runtime, job_id, state, timeout=15.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        if runtime.jobs.get(job_id).state is state:
            return runtime.jobs.get(job_id)
        time.sleep(0.02)
    raise TimeoutError(runtime.jobs.get(job_id).state)


def test_suspend_export_import_resume_completes(tmp_path):
    runtime_a = _runtime(tmp_path / "a.sqlite")
    scheduler_a = Scheduler(runtime_a, poll_period=0.02)
    record = scheduler_a.enqueue(
        "sleep", {"duration": "0.15", "steps": "4"}, "quick", "u")
    scheduler_a.start()
    try:
        # suspend once the second activity's checkpoint is visible
        deadline = time.time() + 15
        while time.time() < deadline:
            done, _ = runtime_a.jobs.get(record.id).checkpoint
            if "s1" in done:
                break
            time.sleep(0.01)
        scheduler_a.suspend(record.id)
        _wait_state(runtime_a, record.id, JobState.SUSPENDED)
    finally:
        scheduler_a.stop()

    # carry the whole registry, including the suspended job, to a fresh
    # deployment via the XML dump
    document = export_xml(runtime_a.registry)
    runtime_b = _runtime(tmp_path / "b.sqlite")
    # fresh store: drop the pre-created skeleton so the import starts clean
    for queue in runtime_b.registry.find_by_type(EntityType.QUEUE):
        runtime_b.registry.delete_entity(queue.id, queue.version)
    for root in runtime_b.registry.roots():
        runtime_b.registry.delete_entity(root.id, root.version)
    import_xml(runtime_b.registry, document)

    imported = runtime_b.jobs.get(record.id)
    assert imported.state is JobState.SUSPENDED
    done, _ = imported.checkpoint
    assert set(done) >= {"s0", "s1"}
    remaining = {f"s{i}" for i in range(4)} - set(done)
    assert remaining, "nothing left to resume; suspend landed too late"

    scheduler_b = Scheduler(runtime_b, poll_period=0.02)
    scheduler_b.resume(record.id)
    scheduler_b.start()
    try:
        final = _wait_state(runtime_b, record.id, JobState.COMPLETED)
        _, results = final.checkpoint
        assert set(results) >= {"s0", "s1", "s2", "s3"}
        # only the activities beyond the imported checkpoint ran here
        executed_here = {e.activity for e in runtime_b.log.ledger_entries(record.id)
                         if e.status == "completed"}
        assert executed_here == remaining
    finally:
        scheduler_b.stop()


def test_kill_restart_resumes_from_checkpoint(tmp_path):
    registry_path = tmp_path / "crash.sqlite"
    runtime = _runtime(registry_path)
    record = runtime.jobs.enqueue(
        "sleep", {"duration": "0.4", "steps": "4"},
        next(q for q in runtime.registry.find_by_type(EntityType.QUEUE)
             if q.name == "long"),
        user="u")

    proc = subprocess.Popen(
        [sys.executable, str(HERE / "stress_controller.py"),
         str(registry_path), "0.02"],
        stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True)
    assert "controller up" in proc.stdout.readline()
    try:
        # wait for the persisted checkpoint to cover the first two steps,
        # then kill between activities
        deadline = time.time() + 30
        while time.time() < deadline:
            done, _ = runtime.jobs.get(record.id).checkpoint
            if "s1" in done and "s2" not in done:
                break
            time.sleep(0.005)
        assert "s1" in done
    finally:
        proc.kill()
        proc.wait(timeout=10)

    assert runtime.jobs.get(record.id).state is JobState.RUNNING  # crashed mid-job

    proc = subprocess.Popen(
        [sys.executable, str(HERE / "stress_controller.py"),
         str(registry_path), "0.02"],
        stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True)
    assert "controller up" in proc.stdout.readline()
    try:
        deadline = time.time() + 30
        while time.time() < deadline:
            if runtime.jobs.get(record.id).state is JobState.COMPLETED:
                break
            time.sleep(0.02)
        final = runtime.jobs.get(record.id)
        assert final.state is JobState.COMPLETED
    finally:
        proc.kill()
        proc.wait(timeout=10)

    # checkpointed activities ran exactly once over both controller lives
    entries = runtime.log.ledger_entries(record.id)
    for activity in ("s0", "s1"):
        completed = [e for e in entries
                     if e.activity == activity and e.status == "completed"]
        assert len(completed) == 1, (activity, entries)
    # the remaining steps completed (an interrupted in-flight step may
    # legitimately appear once as interrupted and once as completed)
    for activity in ("s2", "s3"):
        completed = [e for e in entries
                     if e.activity == activity and e.status == "completed"]
        assert len(completed) == 1, (activity, entries)
