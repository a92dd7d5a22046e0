"""Shared-filesystem data-plane adapter.

Same put/get contract as the kv store, backed by a directory every worker
on the endpoint can reach.  Layout: <root>/<endpoint_id>/<sha256(key)>.
Publishes via write-to-temp then atomic rename so concurrent readers
never observe a half-written value.
"""
from __future__ import annotations

import hashlib
import os
import tempfile
from pathlib import Path

from fedfaas.dataplane.kvstore import KeyNotFound


class IoFailure(Exception):
    pass


class SharedFsAdapter:
    def __init__(self, root: str | os.PathLike, namespace: str = "default") -> None:
        self.base = Path(root) / namespace
        try:
            self.base.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise IoFailure(str(exc)) from exc

    def _path(self, key: str) -> Path:
        return self.base / hashlib.sha256(key.encode("utf-8")).hexdigest()

    def put(self, key: str, value: bytes) -> None:
        try:
            fd, tmp = tempfile.mkstemp(dir=self.base, prefix=".tmp-")
            try:
                os.write(fd, value)
                os.fsync(fd)
            finally:
                os.close(fd)
            os.replace(tmp, self._path(key))
        except OSError as exc:
            raise IoFailure(str(exc)) from exc

    def get(self, key: str) -> bytes:
        path = self._path(key)
        try:
            return path.read_bytes()
        except FileNotFoundError:
            raise KeyNotFound(key) from None
        except OSError as exc:
            raise IoFailure(str(exc)) from exc

    def close(self) -> None:  # interface parity with KvClient
        pass
