"""Data-plane microbenchmarks: communication patterns over both adapters.

Each simulated node is a thread with its own adapter client.  Patterns:

- ``point_to_point``: node 0 publishes one value, node 1 consumes it.
- ``broadcast``: node 0 publishes once, every other node consumes it.
- ``all_to_all``: every node publishes one value per peer, then consumes
  the value each peer addressed to it (a shuffle).

Every trial produces one row: pattern, adapter, nodes, size_bytes,
duration_ns, trial.  duration_ns covers the full pattern from first put
to last get.
"""
from __future__ import annotations

import csv
import os
import threading
import time
from dataclasses import dataclass
from typing import Callable, Sequence

PATTERNS = ("point_to_point", "broadcast", "all_to_all")

# adapter_factory() -> object with put/get/close; one instance per node
AdapterFactory = Callable[[], object]


@dataclass(frozen=True)
class BenchRow:
    pattern: str
    adapter: str
    nodes: int
    size_bytes: int
    duration_ns: int
    trial: int


def _run_nodes(node_fns: Sequence[Callable[[], None]]) -> None:
    errors: list[BaseException] = []

    def wrap(fn: Callable[[], None]) -> None:
        try:
            fn()
        except BaseException as exc:  # noqa: BLE001 - surfaced to the caller
            errors.append(exc)

    threads = [
        threading.Thread(target=wrap, args=(fn,), name=f"bench-node-{i}")
        for i, fn in enumerate(node_fns)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if errors:
        raise errors[0]


def _wait_get(client, key: str):
    from fedfaas.dataplane.kvstore import KeyNotFound

    deadline = time.monotonic() + 60.0
    backoff = 0.0002
    while True:
        try:
            return client.get(key)
        except KeyNotFound:
            if time.monotonic() > deadline:
                raise
            time.sleep(backoff)
            backoff = min(backoff * 2, 0.01)


def run_trial(
    pattern: str,
    adapter_name: str,
    adapter_factory: AdapterFactory,
    nodes: int,
    size_bytes: int,
    trial: int,
    reps: int = 1,
) -> BenchRow:
    """One timed round of a transfer pattern.

    ``reps`` repeats the point-to-point exchange within a single timed
    window so small-message trials measure milliseconds instead of
    microseconds; the reported duration is the whole window.
    """
    if pattern not in PATTERNS:
        raise ValueError(f"unknown pattern {pattern!r}")
    payload = os.urandom(size_bytes)
    clients = [adapter_factory() for _ in range(nodes)]
    tag = f"{pattern}-{trial}"
    try:
        start = time.monotonic_ns()
        if pattern == "point_to_point":
            for rep in range(reps):
                clients[0].put(f"{tag}/msg{rep}", payload)
                _wait_get(clients[1], f"{tag}/msg{rep}")
        elif pattern == "broadcast":
            clients[0].put(f"{tag}/msg", payload)
            _run_nodes([
                (lambda c=c: _wait_get(c, f"{tag}/msg")) for c in clients[1:]
            ])
        else:  # all_to_all
            def node(rank: int) -> None:
                c = clients[rank]
                for peer in range(nodes):
                    if peer != rank:
                        c.put(f"{tag}/{rank}->{peer}", payload)
                for peer in range(nodes):
                    if peer != rank:
                        _wait_get(c, f"{tag}/{peer}->{rank}")

            _run_nodes([(lambda r=r: node(r)) for r in range(nodes)])
        duration = time.monotonic_ns() - start
    finally:
        for c in clients:
            c.close()
    return BenchRow(pattern, adapter_name, nodes, size_bytes, duration, trial)


def run_suite(
    adapters: dict[str, AdapterFactory],
    patterns: Sequence[str] = PATTERNS,
    nodes: int = 4,
    sizes: Sequence[int] = (1024, 65536, 1048576),
    trials: int = 3,
) -> list[BenchRow]:
    rows = []
    for adapter_name, factory in adapters.items():
        for pattern in patterns:
            eff_nodes = 2 if pattern == "point_to_point" else nodes
            for size in sizes:
                for trial in range(trials):
                    rows.append(
                        run_trial(pattern, adapter_name, factory, eff_nodes, size, trial)
                    )
    return rows


def write_csv(rows: Sequence[BenchRow], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["pattern", "adapter", "nodes", "size_bytes", "duration_ns", "trial"]
        )
        for r in rows:
            writer.writerow(
                [r.pattern, r.adapter, r.nodes, r.size_bytes, r.duration_ns, r.trial]
            )
