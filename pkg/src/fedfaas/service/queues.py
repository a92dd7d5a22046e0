"""Per-endpoint task and result queues.

Invariant: a task_id lives in at most one of {task_queue, inflight,
result_queue} at any time.  The forwarder moves ids task_queue -> inflight
on dispatch, inflight -> result_queue when the endpoint returns a result,
and inflight -> front of task_queue when the endpoint is lost.
"""
from __future__ import annotations

import threading
from typing import Optional

from fedfaas.service.store import InMemoryStore


class EndpointQueues:
    def __init__(self, store: InMemoryStore, endpoint_id: str) -> None:
        self._store = store
        self._tasks = f"ep:{endpoint_id}:tasks"
        self._inflight = f"ep:{endpoint_id}:inflight"
        self._results = f"ep:{endpoint_id}:results"
        # inflight dispatch order, for requeue-at-front in original order
        self._inflight_order: list[str] = []
        self.cond = threading.Condition()

    def enqueue(self, task_id: str) -> None:
        with self.cond:
            self._store.list_append(self._tasks, task_id)
            self.cond.notify_all()

    def pop_for_dispatch(self, dispatched_at_ns: int) -> Optional[str]:
        with self.cond:
            task_id = self._store.list_pop_front(self._tasks)
            if task_id is not None:
                self._store.map_set(self._inflight, task_id, dispatched_at_ns)
                self._inflight_order.append(task_id)
            return task_id

    def complete(self, task_id: str, result: object) -> bool:
        """Move an inflight task to the result queue. False on duplicate."""
        with self.cond:
            if self._store.map_contains(self._results, task_id):
                return False
            if self._store.map_pop(self._inflight, task_id) is None:
                # Result for a task no longer counted inflight: it was
                # requeued after a disconnect and the stale execution
                # finished first.  First completion wins; drop the requeued
                # copy so it is not dispatched again.
                self._store.list_remove(self._tasks, task_id)
            if task_id in self._inflight_order:
                self._inflight_order.remove(task_id)
            self._store.map_set(self._results, task_id, result)
            return True

    def requeue_inflight(self) -> list[str]:
        """Move every inflight id back to the queue front, original order."""
        with self.cond:
            order = [
                t for t in self._inflight_order if self._store.map_contains(self._inflight, t)
            ]
            for task_id in order:
                self._store.map_pop(self._inflight, task_id)
            self._inflight_order.clear()
            self._store.list_push_front(self._tasks, order)
            self.cond.notify_all()
            return order

    def get_result(self, task_id: str):
        with self.cond:
            return self._store.map_get(self._results, task_id)

    def purge_result(self, task_id: str) -> None:
        with self.cond:
            self._store.map_pop(self._results, task_id)

    def queued_count(self) -> int:
        return self._store.list_len(self._tasks)

    def inflight_count(self) -> int:
        return self._store.map_len(self._inflight)

    def snapshot(self) -> dict:
        with self.cond:
            return {
                "queued": self._store.list_items(self._tasks),
                "inflight": self._store.map_keys(self._inflight),
                "results": self._store.map_keys(self._results),
            }
