"""Compute providers: how an agent acquires blocks of manager processes.

A block is ``nodes_per_block`` manager processes.  The local-process
provider spawns them immediately on this host; the mock-batch provider
records the submission and applies a configurable queue delay first,
simulating a batch scheduler, then spawns the same way.
"""
from __future__ import annotations

import json
import subprocess
import sys
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from fedfaas.agent.strategy import ProviderConfig, ProviderKind


class ProviderFailure(Exception):
    pass


@dataclass
class Block:
    block_id: str
    processes: list[subprocess.Popen] = field(default_factory=list)
    submitted_at: float = 0.0
    launched: bool = False


def _spawn_managers(
    block: Block,
    cfg: ProviderConfig,
    agent_addr: tuple[str, int],
    secret: str,
    workdir: Path,
) -> None:
    host, port = agent_addr
    for n in range(cfg.nodes_per_block):
        node_id = f"{block.block_id}-node{n}"
        argv = [
            sys.executable, "-m", "fedfaas.node.cli",
            "--agent", f"{host}:{port}",
            "--node-id", node_id,
            "--workers", str(cfg.workers_per_node),
            "--secret", secret,
            "--block-id", block.block_id,
            "--workdir", str(workdir / node_id),
        ]
        try:
            block.processes.append(
                subprocess.Popen(argv, stdout=subprocess.DEVNULL, stderr=sys.stderr)
            )
        except OSError as exc:
            raise ProviderFailure(f"spawn failed for {node_id}: {exc}") from exc
    block.launched = True


class LocalProcessProvider:
    """Spawns manager processes on the local host, one block at a time."""

    kind = ProviderKind.LOCAL_PROCESS

    def __init__(self, agent_addr: tuple[str, int], secret: str, workdir: str) -> None:
        self.agent_addr = agent_addr
        self.secret = secret
        self.workdir = Path(workdir)
        self.blocks: dict[str, Block] = {}
        self._counter = 0
        self._lock = threading.Lock()

    def submit_block(self, cfg: ProviderConfig) -> str:
        with self._lock:
            block_id = f"block-{self._counter}"
            self._counter += 1
            block = Block(block_id, submitted_at=time.monotonic())
            self.blocks[block_id] = block
        _spawn_managers(block, cfg, self.agent_addr, self.secret, self.workdir)
        return block_id

    def cancel_block(self, block_id: str, grace: float = 5.0) -> None:
        block = self.blocks.pop(block_id, None)
        if block is None:
            raise ProviderFailure(f"unknown block {block_id}")
        deadline = time.monotonic() + grace
        for proc in block.processes:
            try:
                proc.wait(timeout=max(0.0, deadline - time.monotonic()))
            except subprocess.TimeoutExpired:
                proc.terminate()

    def poll(self) -> None:
        pass

    def block_count(self) -> int:
        return len(self.blocks)

    def shutdown(self) -> None:
        for block in list(self.blocks.values()):
            for proc in block.processes:
                proc.terminate()
        self.blocks.clear()


class MockBatchProvider(LocalProcessProvider):
    """Batch-scheduler stand-in: submissions wait in a simulated queue."""

    kind = ProviderKind.MOCK_BATCH

    def __init__(
        self,
        agent_addr: tuple[str, int],
        secret: str,
        workdir: str,
        queue_delay: float,
        now: Optional[Callable[[], float]] = None,
    ) -> None:
        super().__init__(agent_addr, secret, workdir)
        self.queue_delay = queue_delay
        self.now = now or time.monotonic
        self._pending: list[tuple[Block, ProviderConfig, float]] = []
        self.workdir.mkdir(parents=True, exist_ok=True)
        self.record_path = self.workdir / "submissions.jsonl"

    def submit_block(self, cfg: ProviderConfig) -> str:
        with self._lock:
            block_id = f"block-{self._counter}"
            self._counter += 1
            block = Block(block_id, submitted_at=self.now())
            self.blocks[block_id] = block
            self._pending.append((block, cfg, block.submitted_at + self.queue_delay))
        with self.record_path.open("a") as fh:
            fh.write(json.dumps({
                "block_id": block_id,
                "nodes": cfg.nodes_per_block,
                "workers_per_node": cfg.workers_per_node,
                "queue_delay": self.queue_delay,
            }) + "\n")
        return block_id

    def poll(self) -> None:
        """Launch submissions whose simulated queue delay has elapsed."""
        due = []
        with self._lock:
            now = self.now()
            still = []
            for item in self._pending:
                (due if item[2] <= now else still).append(item)
            self._pending = still
        for block, cfg, _ in due:
            if block.block_id in self.blocks:  # not cancelled while queued
                _spawn_managers(block, cfg, self.agent_addr, self.secret, self.workdir)

    def cancel_block(self, block_id: str, grace: float = 5.0) -> None:
        with self._lock:
            self._pending = [p for p in self._pending if p[0].block_id != block_id]
        super().cancel_block(block_id, grace)


def make_provider(
    cfg: ProviderConfig, agent_addr: tuple[str, int], secret: str, workdir: str
) -> LocalProcessProvider:
    if cfg.provider_kind is ProviderKind.MOCK_BATCH:
        return MockBatchProvider(agent_addr, secret, workdir, cfg.queue_delay)
    return LocalProcessProvider(agent_addr, secret, workdir)
