"""Worker slot table and container lifecycle decisions for one node.

A manager partitions its node into worker slots.  Each slot can host one
container sandbox at a time; a sandbox is an OS process plus an injected
artificial cold-start delay, which reproduces the scheduling-relevant
behavior of real container backends without privileged runtimes.
"""
from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field
from typing import Optional


@dataclass(frozen=True)
class ColdStartProfile:
    """Cold-start cost as (min, mean, max) seconds; fixed when equal.

    Sampling uses a triangular distribution with the mean as the mode,
    which is the natural fit for the three published statistics.
    """

    min_s: float
    mean_s: float
    max_s: float

    def __post_init__(self) -> None:
        if not self.min_s <= self.mean_s <= self.max_s:
            raise ValueError("cold start requires min <= mean <= max")

    @classmethod
    def fixed(cls, seconds: float) -> "ColdStartProfile":
        return cls(seconds, seconds, seconds)

    def sample(self, rng: random.Random) -> float:
        if self.min_s == self.max_s:
            return self.min_s
        return rng.triangular(self.min_s, self.max_s, self.mean_s)


# Published instantiation-time profiles, usable by name in configs.
NAMED_PROFILES = {
    "theta-singularity": ColdStartProfile(9.83, 10.40, 14.06),
    "ec2-docker": ColdStartProfile(1.74, 1.79, 1.88),
    "ec2-singularity": ColdStartProfile(1.19, 1.22, 1.26),
    "instant": ColdStartProfile.fixed(0.0),
}


@dataclass(frozen=True)
class ContainerSpec:
    type_id: str
    cold_start: ColdStartProfile = NAMED_PROFILES["instant"]
    warm_idle_timeout: float = 600.0
    launch_template: Optional[str] = None

    def __post_init__(self) -> None:
        if self.warm_idle_timeout <= 0:
            raise ValueError("warm_idle_timeout must be positive")


class SlotState(str, enum.Enum):
    EMPTY = "empty"
    COLD_STARTING = "cold_starting"
    WARM_IDLE = "warm_idle"
    BUSY = "busy"


@dataclass
class WorkerSlot:
    slot_id: int
    state: SlotState = SlotState.EMPTY
    container_type: Optional[str] = None
    last_used: int = 0
    current_task: Optional[str] = None

    def check(self) -> None:
        if (self.current_task is not None) != (self.state is SlotState.BUSY):
            raise ValueError("current_task set iff slot busy")
        if self.state is not SlotState.EMPTY and self.container_type is None:
            raise ValueError("non-empty slot needs a container_type")


def allocate_containers(task_mix: dict[str, int], capacity: int) -> dict[str, int]:
    """Apportion slots to container types proportionally to task counts.

    Largest-remainder apportionment of ``min(capacity, total demand)``
    slots over ``count_i * target / total`` quotas; remainder ties break
    toward the lower type_id.  Deterministic for a fixed mix.
    """
    if capacity < 1:
        raise ValueError("capacity must be >= 1")
    mix = {t: n for t, n in task_mix.items() if n > 0}
    if not mix:
        raise ValueError("task_mix must name at least one type with demand")
    total = sum(mix.values())
    target = min(capacity, total)
    quotas = {t: n * target / total for t, n in mix.items()}
    alloc = {t: math.floor(q) for t, q in quotas.items()}
    short = target - sum(alloc.values())
    by_remainder = sorted(mix, key=lambda t: (-(quotas[t] - alloc[t]), t))
    for t in by_remainder[:short]:
        alloc[t] += 1
    return alloc


@dataclass(frozen=True)
class ReconcileAction:
    op: str  # "start" | "stop"
    slot_id: int
    container_type: Optional[str] = None


def reconcile_slots(
    target: dict[str, int], slots: list[WorkerSlot]
) -> list[ReconcileAction]:
    """Plan container starts/stops to move the slot table toward ``target``.

    Warm containers already matching the target are untouched.  Deficits
    fill empty slots first; only when none remain are surplus warm-idle
    containers stopped, least-recently-used first.  Busy and cold-starting
    slots are never preempted, so unsatisfiable deficits are deferred to a
    later reconcile pass.
    """
    counts: dict[str, int] = {}
    for s in slots:
        if s.state is not SlotState.EMPTY and s.container_type is not None:
            counts[s.container_type] = counts.get(s.container_type, 0) + 1

    empties = sorted(s.slot_id for s in slots if s.state is SlotState.EMPTY)
    surplus_pool = sorted(
        (s for s in slots if s.state is SlotState.WARM_IDLE),
        key=lambda s: (s.last_used, s.slot_id),
    )

    actions: list[ReconcileAction] = []
    for type_id in sorted(target):
        deficit = target[type_id] - counts.get(type_id, 0)
        for _ in range(max(0, deficit)):
            if empties:
                slot_id = empties.pop(0)
            else:
                victim = _pop_surplus(surplus_pool, counts, target)
                if victim is None:
                    break  # everything else is busy or needed; defer
                counts[victim.container_type] -= 1
                actions.append(ReconcileAction("stop", victim.slot_id))
                slot_id = victim.slot_id
            counts[type_id] = counts.get(type_id, 0) + 1
            actions.append(ReconcileAction("start", slot_id, type_id))
    return actions


def _pop_surplus(
    pool: list[WorkerSlot], counts: dict[str, int], target: dict[str, int]
) -> Optional[WorkerSlot]:
    for i, s in enumerate(pool):
        if counts.get(s.container_type, 0) > target.get(s.container_type, 0):
            return pool.pop(i)
    return None


def expire_idle(
    slots: list[WorkerSlot], specs: dict[str, ContainerSpec], now_ns: int
) -> list[ReconcileAction]:
    """Stop warm containers idle past their type's warm_idle_timeout."""
    actions = []
    for s in slots:
        if s.state is not SlotState.WARM_IDLE or s.container_type not in specs:
            continue
        timeout_ns = int(specs[s.container_type].warm_idle_timeout * 1e9)
        if now_ns - s.last_used >= timeout_ns:
            actions.append(ReconcileAction("stop", s.slot_id))
    return actions
