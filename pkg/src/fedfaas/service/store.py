"""Queue/record store behind the control service.

A small linearizable list + map store, mirroring how an external
list-structure store would be used: per-endpoint task queues are lists,
results and inflight sets are maps.  Everything here runs under one lock,
which is plenty at single-binary scale; an external store can implement
the same interface for a distributed deployment.
"""
from __future__ import annotations

import threading
from collections import deque
from typing import Any, Iterable, Optional


class InMemoryStore:
    def __init__(self) -> None:
        self._lists: dict[str, deque] = {}
        self._maps: dict[str, dict] = {}
        self._lock = threading.RLock()

    # -- lists ---------------------------------------------------------
    def list_append(self, name: str, item: Any) -> None:
        with self._lock:
            self._lists.setdefault(name, deque()).append(item)

    def list_push_front(self, name: str, items: Iterable[Any]) -> None:
        """Prepend ``items`` preserving their given order."""
        with self._lock:
            q = self._lists.setdefault(name, deque())
            for item in reversed(list(items)):
                q.appendleft(item)

    def list_pop_front(self, name: str) -> Optional[Any]:
        with self._lock:
            q = self._lists.get(name)
            return q.popleft() if q else None

    def list_remove(self, name: str, item: Any) -> bool:
        with self._lock:
            q = self._lists.get(name)
            if q and item in q:
                q.remove(item)
                return True
            return False

    def list_len(self, name: str) -> int:
        with self._lock:
            return len(self._lists.get(name, ()))

    def list_items(self, name: str) -> list:
        with self._lock:
            return list(self._lists.get(name, ()))

    # -- maps ----------------------------------------------------------
    def map_set(self, name: str, key: str, value: Any) -> None:
        with self._lock:
            self._maps.setdefault(name, {})[key] = value

    def map_get(self, name: str, key: str, default: Any = None) -> Any:
        with self._lock:
            return self._maps.get(name, {}).get(key, default)

    def map_pop(self, name: str, key: str, default: Any = None) -> Any:
        with self._lock:
            return self._maps.get(name, {}).pop(key, default)

    def map_contains(self, name: str, key: str) -> bool:
        with self._lock:
            return key in self._maps.get(name, {})

    def map_len(self, name: str) -> int:
        with self._lock:
            return len(self._maps.get(name, {}))

    def map_keys(self, name: str) -> list[str]:
        with self._lock:
            return list(self._maps.get(name, {}))

    def map_items(self, name: str) -> list[tuple[str, Any]]:
        with self._lock:
            return list(self._maps.get(name, {}).items())
