"""Warming-aware task routing at the endpoint agent.

Managers advertise their warm-container inventory and idle capacity.
Given a task's container type, routing prefers managers with an idle warm
container of that type, breaking ties toward the most idle warm workers
(load balance) then the lowest manager id (determinism).  With no warm
candidate, a manager with idle capacity is picked uniformly at random.
"""
from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from typing import Optional, Sequence


class NoManagers(Exception):
    """No connected manager has capacity; the task stays queued."""


class RouteReason(str, enum.Enum):
    WARM_HIT = "warm_hit"
    RANDOM_FALLBACK = "random_fallback"


@dataclass(frozen=True)
class ManagerAdvertisement:
    manager_id: str
    node_id: str
    capacity: int
    idle_workers: int
    # type_id -> (warm_count, idle_warm_count)
    warm_inventory: dict[str, tuple[int, int]] = field(default_factory=dict)
    advertised_at: int = 0

    def check(self) -> None:
        if self.idle_workers > self.capacity:
            raise ValueError("idle_workers exceeds capacity")
        warm_total = 0
        for warm, idle_warm in self.warm_inventory.values():
            if idle_warm > warm:
                raise ValueError("idle_warm_count exceeds warm_count")
            warm_total += warm
        if warm_total > self.capacity:
            raise ValueError("warm inventory exceeds capacity")

    def idle_warm(self, type_id: Optional[str]) -> int:
        if type_id is None:
            return 0
        return self.warm_inventory.get(type_id, (0, 0))[1]


@dataclass(frozen=True)
class RoutingDecision:
    task_id: str
    chosen_manager: str
    reason: RouteReason


def route_task(
    task_id: str,
    container_type: Optional[str],
    ads: Sequence[ManagerAdvertisement],
    rng: random.Random,
) -> RoutingDecision:
    """Pick a manager for one task from the current advertisement set."""
    if container_type is not None:
        warm = [ad for ad in ads if ad.idle_warm(container_type) >= 1]
        if warm:
            best = min(
                warm, key=lambda ad: (-ad.idle_warm(container_type), ad.manager_id)
            )
            return RoutingDecision(task_id, best.manager_id, RouteReason.WARM_HIT)
    idle = sorted(
        (ad for ad in ads if ad.idle_workers >= 1), key=lambda ad: ad.manager_id
    )
    if not idle:
        raise NoManagers(task_id)
    chosen = idle[rng.randrange(len(idle))]
    return RoutingDecision(task_id, chosen.manager_id, RouteReason.RANDOM_FALLBACK)


def dispatch_budget(
    ad: ManagerAdvertisement, outstanding: int, prefetch_count: int
) -> int:
    """How many more tasks may be sent to a manager right now.

    Tasks in flight to a manager never exceed idle_workers + prefetch_count
    at dispatch time; ``outstanding`` counts dispatched-but-unfinished
    tasks already charged against this manager.
    """
    if prefetch_count < 0:
        raise ValueError("prefetch_count must be >= 0")
    return max(0, ad.idle_workers + prefetch_count - outstanding)
