import pytest

from fedfaas.protocol import (
    Envelope,
    IllegalTransition,
    LatencyBreakdown,
    TaskRecord,
    TaskState,
)
from fedfaas.protocol.records import transition_allowed


def make_task():
    return TaskRecord("t1", "f1", "e1", Envelope(1, b""))


def test_normal_lifecycle():
    t = make_task()
    now = 0
    for state in (
        TaskState.QUEUED,
        TaskState.DISPATCHED_TO_ENDPOINT,
        TaskState.DISPATCHED_TO_MANAGER,
        TaskState.RUNNING,
    ):
        now += 10
        t.advance(state, now)
    t.set_success(Envelope(1, b""), now + 10)
    assert t.state is TaskState.SUCCESS
    assert t.attempts == 1
    stamps = [t.timestamps[s] for s in t.timestamps]
    assert stamps == sorted(stamps)


def test_revert_to_queued_increments_attempts():
    t = make_task()
    t.advance(TaskState.QUEUED, 1)
    t.advance(TaskState.DISPATCHED_TO_ENDPOINT, 2)
    t.advance(TaskState.QUEUED, 3)
    t.advance(TaskState.DISPATCHED_TO_ENDPOINT, 4)
    assert t.attempts == 2


def test_illegal_transitions():
    t = make_task()
    with pytest.raises(IllegalTransition):
        t.advance(TaskState.RUNNING, 1)  # skipping is forbidden upward only in reverse
        t.advance(TaskState.QUEUED, 2)
        t.advance(TaskState.RECEIVED, 3)


def test_terminal_states_are_final():
    t = make_task()
    t.advance(TaskState.QUEUED, 1)
    t.advance(TaskState.DISPATCHED_TO_ENDPOINT, 2)
    t.set_failed("boom", 3)
    with pytest.raises(IllegalTransition):
        t.advance(TaskState.QUEUED, 4)


def test_received_cannot_revert():
    assert not transition_allowed(TaskState.RECEIVED, TaskState.RECEIVED)
    assert not transition_allowed(TaskState.QUEUED, TaskState.RECEIVED)
    assert transition_allowed(TaskState.RUNNING, TaskState.QUEUED)
    assert not transition_allowed(TaskState.QUEUED, TaskState.QUEUED)


def test_timestamps_must_not_go_backwards():
    t = make_task()
    t.advance(TaskState.QUEUED, 100)
    with pytest.raises(IllegalTransition):
        t.advance(TaskState.DISPATCHED_TO_ENDPOINT, 50)


def test_latency_bracketing():
    lb = LatencyBreakdown(t_s=10, t_f=20, t_e=30, t_w=40)
    lb.validate(end_to_end_ns=100)
    with pytest.raises(ValueError):
        lb.validate(end_to_end_ns=99)
    with pytest.raises(ValueError):
        LatencyBreakdown(t_s=-1).validate()
