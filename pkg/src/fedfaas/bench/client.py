"""Thin REST client used by the bench CLI and the test suite.

Payloads cross the REST boundary as base64-encoded envelopes produced by
the serialization facade.
"""
from __future__ import annotations

import base64
import os
import time
from typing import Any, Optional

import requests

from fedfaas.protocol.codecs import Envelope, deserialize, serialize

TOKEN_ENV = "FEDFAAS_TOKEN"


def encode_payload(value: Any) -> str:
    return base64.b64encode(serialize(value).to_bytes()).decode("ascii")


def decode_payload(b64: str) -> Any:
    return deserialize(Envelope.from_bytes(base64.b64decode(b64)))


class ApiError(RuntimeError):
    def __init__(self, status: int, code: str, message: str) -> None:
        super().__init__(f"{code}: {message}")
        self.status = status
        self.code = code


class ApiClient:
    def __init__(self, base_url: str, token: Optional[str] = None, timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.token = token or os.environ.get(TOKEN_ENV, "")
        self.timeout = timeout
        self.session = requests.Session()

    def _call(self, method: str, path: str, **kw) -> dict:
        resp = self.session.request(
            method,
            f"{self.base_url}{path}",
            headers={"Authorization": f"Bearer {self.token}"},
            timeout=self.timeout,
            **kw,
        )
        if resp.status_code >= 400:
            try:
                err = resp.json().get("error", {})
            except ValueError:
                err = {}
            raise ApiError(
                resp.status_code,
                err.get("code", "http_error"),
                err.get("message", resp.text[:200]),
            )
        return resp.json()

    # -- operations ----------------------------------------------------
    def register_function(
        self,
        name: str,
        body: Any,
        allow_reexecution: bool = True,
        container_type: Optional[str] = None,
        authorized_users: Optional[list[str]] = None,
    ) -> str:
        payload: dict = {
            "name": name,
            "body_b64": encode_payload(body),
            "allow_reexecution": allow_reexecution,
            "container_type": container_type,
        }
        if authorized_users is not None:
            payload["authorized_users"] = authorized_users
        return self._call("POST", "/functions", json=payload)["function_id"]

    def run(self, function_id: str, endpoint_id: str, value: Any = None) -> str:
        return self._call(
            "POST",
            "/tasks",
            json={
                "function_id": function_id,
                "endpoint_id": endpoint_id,
                "input_b64": encode_payload(value),
            },
        )["task_id"]

    def run_batch(
        self, function_id: str, endpoint_id: str, values: list[Any]
    ) -> list[dict]:
        items = [
            {
                "function_id": function_id,
                "endpoint_id": endpoint_id,
                "input_b64": encode_payload(v),
            }
            for v in values
        ]
        return self._call("POST", "/batch", json={"tasks": items})["results"]

    def run_batch_mixed(self, tasks: list[tuple[str, str, Any]]) -> list[dict]:
        """Batch of (function_id, endpoint_id, value) triples."""
        items = [
            {
                "function_id": fid,
                "endpoint_id": eid,
                "input_b64": encode_payload(value),
            }
            for fid, eid, value in tasks
        ]
        return self._call("POST", "/batch", json={"tasks": items})["results"]

    def status(self, task_id: str) -> dict:
        return self._call("GET", f"/tasks/{task_id}/status")

    def result_raw(self, task_id: str) -> dict:
        return self._call("GET", f"/tasks/{task_id}/result")

    def batch_status(self, task_ids: list[str]) -> dict:
        return self._call("POST", "/batch_status", json={"task_ids": task_ids})

    def endpoint_status(self, endpoint_id: str) -> dict:
        return self._call("GET", f"/endpoints/{endpoint_id}/status")

    def list_endpoints(self) -> list[dict]:
        return self._call("GET", "/endpoints")["endpoints"]

    # -- conveniences ---------------------------------------------------
    def wait_result(self, task_id: str, timeout: float = 60.0, poll: float = 0.02) -> dict:
        """Poll until terminal; returns the raw result payload."""
        deadline = time.monotonic() + timeout
        while True:
            res = self.result_raw(task_id)
            if res["status"] != "pending":
                return res
            if time.monotonic() > deadline:
                raise TimeoutError(f"task {task_id} still pending after {timeout}s")
            time.sleep(poll)

    def wait_value(self, task_id: str, timeout: float = 60.0) -> Any:
        res = self.wait_result(task_id, timeout)
        if res["status"] != "success":
            raise RuntimeError(f"task failed: {res.get('error')}")
        return decode_payload(res["result_b64"])

    def wait_all(
        self, task_ids: list[str], timeout: float = 300.0, poll: float = 0.05
    ) -> dict[str, str]:
        """Wait until every task is terminal; returns task_id -> status."""
        deadline = time.monotonic() + timeout
        pending = list(task_ids)
        states: dict[str, str] = {}
        while pending:
            if time.monotonic() > deadline:
                raise TimeoutError(f"{len(pending)} tasks still pending")
            chunk = {
                row["task_id"]: row.get("state") or row.get("status")
                for row in self.batch_status(pending[:500])["results"]
                if "task_id" in row
            }
            still = []
            for tid in pending:
                st = chunk.get(tid)
                if st in ("success", "failed"):
                    states[tid] = st
                else:
                    still.append(tid)
            pending = still
            if pending:
                time.sleep(poll)
        return states
