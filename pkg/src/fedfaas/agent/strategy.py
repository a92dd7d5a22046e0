"""Elastic provisioning strategy for an endpoint agent.

Runs on a periodic tick (1 s by default): requests blocks while pending
tasks outnumber idle workers, and releases blocks whose managers have all
been fully idle past the configured maximum idle time, never dropping
below the minimum block count.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional


class ProviderKind(str, enum.Enum):
    LOCAL_PROCESS = "local_process"
    MOCK_BATCH = "mock_batch"


@dataclass(frozen=True)
class ProviderConfig:
    provider_kind: ProviderKind = ProviderKind.LOCAL_PROCESS
    min_blocks: int = 0
    max_blocks: int = 1
    nodes_per_block: int = 1
    workers_per_node: int = 1
    max_idle: float = 120.0
    # New blocks requested per this many waiting tasks beyond idle capacity.
    scale_up_threshold: int = 10
    # mock_batch only: simulated scheduler queue delay, seconds.
    queue_delay: float = 0.0

    def __post_init__(self) -> None:
        if self.min_blocks > self.max_blocks:
            raise ValueError("min_blocks must be <= max_blocks")
        if self.workers_per_node < 1 or self.nodes_per_block < 1:
            raise ValueError("need at least one worker per node and node per block")
        if self.scale_up_threshold < 1:
            raise ValueError("scale_up_threshold must be >= 1")


@dataclass(frozen=True)
class StrategySnapshot:
    pending_tasks: int
    idle_workers: int
    active_workers: int
    blocks: int
    sampled_at: int = 0

    def __post_init__(self) -> None:
        for name in ("pending_tasks", "idle_workers", "active_workers", "blocks"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class ScaleAction:
    op: str  # "request_block" | "release_block"
    block_id: Optional[str] = None


def strategy_tick(
    snapshot: StrategySnapshot,
    cfg: ProviderConfig,
    block_idle_s: dict[str, float] | None = None,
) -> list[ScaleAction]:
    """One scaling decision.

    ``block_idle_s`` maps block_id to how long every manager in that block
    has been fully idle (no running or queued tasks); blocks with any work
    must be absent from the map.
    """
    block_idle_s = block_idle_s or {}
    actions: list[ScaleAction] = []

    want = 0
    if snapshot.blocks < cfg.min_blocks:
        want = cfg.min_blocks - snapshot.blocks
    shortfall = snapshot.pending_tasks - snapshot.idle_workers
    if shortfall > 0 and snapshot.blocks < cfg.max_blocks:
        want = max(want, math.ceil(shortfall / cfg.scale_up_threshold))
    want = min(want, cfg.max_blocks - snapshot.blocks)
    actions.extend(ScaleAction("request_block") for _ in range(want))
    if want:
        return actions  # scaling up and down in one tick makes no sense

    releasable = sorted(
        (b for b, idle in block_idle_s.items() if idle >= cfg.max_idle),
        key=lambda b: -block_idle_s[b],
    )
    room = snapshot.blocks - cfg.min_blocks
    for block_id in releasable[: max(0, room)]:
        actions.append(ScaleAction("release_block", block_id))
    return actions
