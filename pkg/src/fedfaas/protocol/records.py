"""Domain records: functions, endpoints, tasks, and the task lifecycle."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from fedfaas.protocol.codecs import Envelope


class IllegalTransition(Exception):
    """Task lifecycle moved outside the permitted transition graph."""


class TaskState(str, enum.Enum):
    RECEIVED = "received"
    QUEUED = "queued"
    DISPATCHED_TO_ENDPOINT = "dispatched_to_endpoint"
    DISPATCHED_TO_MANAGER = "dispatched_to_manager"
    RUNNING = "running"
    SUCCESS = "success"
    FAILED = "failed"


_ORDER = {
    TaskState.RECEIVED: 0,
    TaskState.QUEUED: 1,
    TaskState.DISPATCHED_TO_ENDPOINT: 2,
    TaskState.DISPATCHED_TO_MANAGER: 3,
    TaskState.RUNNING: 4,
    TaskState.SUCCESS: 5,
    TaskState.FAILED: 5,
}

# States that may fall back to QUEUED when a downstream layer is lost.
_REVERTIBLE = {
    TaskState.DISPATCHED_TO_ENDPOINT,
    TaskState.DISPATCHED_TO_MANAGER,
    TaskState.RUNNING,
}

TERMINAL_STATES = {TaskState.SUCCESS, TaskState.FAILED}


def transition_allowed(src: TaskState, dst: TaskState) -> bool:
    if src in TERMINAL_STATES:
        return False
    if dst is TaskState.QUEUED and src in _REVERTIBLE:
        return True
    return _ORDER[dst] > _ORDER[src]


class EndpointStatus(str, enum.Enum):
    ONLINE = "online"
    OFFLINE = "offline"


@dataclass
class LatencyBreakdown:
    """Per-task overhead components, all in nanoseconds.

    t_s: service (authenticate, store, enqueue)
    t_f: forwarder (dequeue, dispatch, store result)
    t_e: endpoint + manager queueing/dispatch, both directions
    t_w: function execution proper
    """

    t_s: int = 0
    t_f: int = 0
    t_e: int = 0
    t_w: int = 0

    def total(self) -> int:
        return self.t_s + self.t_f + self.t_e + self.t_w

    def validate(self, end_to_end_ns: Optional[int] = None) -> None:
        for name in ("t_s", "t_f", "t_e", "t_w"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} negative")
        if end_to_end_ns is not None and self.total() > end_to_end_ns:
            raise ValueError("components exceed end-to-end envelope")


@dataclass
class FunctionRecord:
    function_id: str
    name: str
    body: Envelope
    owner: str
    container_type: Optional[str] = None
    authorized_users: set[str] = field(default_factory=set)
    registered_at: int = 0
    allow_reexecution: bool = True

    def invocable_by(self, user: str) -> bool:
        if user == self.owner:
            return True
        return user in self.authorized_users if self.authorized_users else False


@dataclass
class EndpointRecord:
    endpoint_id: str
    name: str
    owner: str
    status: EndpointStatus = EndpointStatus.OFFLINE
    last_heartbeat: int = 0
    forwarder_address: Optional[tuple[str, int]] = None


@dataclass
class TaskRecord:
    task_id: str
    function_id: str
    endpoint_id: str
    input: Envelope
    state: TaskState = TaskState.RECEIVED
    result: Optional[Envelope] = None
    error: Optional[str] = None
    attempts: int = 0
    timestamps: dict[TaskState, int] = field(default_factory=dict)
    latency: Optional[LatencyBreakdown] = None
    submitter: str = ""

    def advance(self, dst: TaskState, now_ns: int) -> None:
        if not transition_allowed(self.state, dst):
            raise IllegalTransition(f"{self.state.value} -> {dst.value}")
        prev = self.timestamps.get(self.state)
        if prev is not None and now_ns < prev:
            raise IllegalTransition("timestamps must be monotone nondecreasing")
        if dst is TaskState.DISPATCHED_TO_ENDPOINT:
            self.attempts += 1
        self.state = dst
        self.timestamps[dst] = now_ns

    def set_success(self, result: Envelope, now_ns: int) -> None:
        self.advance(TaskState.SUCCESS, now_ns)
        self.result = result

    def set_failed(self, error: str, now_ns: int) -> None:
        self.advance(TaskState.FAILED, now_ns)
        self.error = error
