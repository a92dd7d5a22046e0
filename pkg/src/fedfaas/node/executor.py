"""Task execution inside a worker.

A function body decodes to an executable spec:

    {"kind": "builtin", "name": "sleep"}
    {"kind": "process", "argv": ["/bin/echo", "hi"]}

Builtins run in-worker; process specs spawn inside the slot's sandbox
working directory.  The task input decodes to the function argument; a
dict input may additionally carry ``stage_in`` / ``stage_out`` reference
lists (consumed here, with staging time reported separately from
execution time) and a ``data`` key holding the actual argument.
"""
from __future__ import annotations

import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from fedfaas.dataplane.kvstore import KvClient
from fedfaas.dataplane.staging import Direction, TransferReference, stage_in, stage_out


class ExecutionError(Exception):
    pass


class UnknownBuiltin(ExecutionError):
    pass


class NonZeroExit(ExecutionError):
    def __init__(self, code: int, stderr: str) -> None:
        super().__init__(f"process exited {code}: {stderr.strip()[:500]}")
        self.code = code
        self.stderr = stderr


@dataclass
class ExecutionContext:
    workdir: Path
    kv: Optional[KvClient] = None


@dataclass
class ExecutionOutcome:
    value: Any
    exec_s: float
    staging_s: float = 0.0


def _as_seconds(arg: Any) -> float:
    # seconds arrive as decimal text; plain numbers also accepted
    if isinstance(arg, (int, float)):
        return float(arg)
    if isinstance(arg, str):
        return float(arg)
    raise ExecutionError(f"cannot read seconds from {type(arg).__name__}")


def _builtin(name: str, arg: Any, ctx: ExecutionContext) -> Any:
    if name == "noop":
        return None
    if name == "echo":
        return arg
    if name == "sleep":
        time.sleep(_as_seconds(arg))
        return None
    if name == "stress":
        deadline = time.monotonic() + _as_seconds(arg)
        x = 1.0001
        while time.monotonic() < deadline:
            for _ in range(10_000):
                x = x * 1.0000001 % 1e6
        return None
    if name == "kvput":
        if ctx.kv is None:
            raise ExecutionError("no kv store configured on this endpoint")
        value = arg["value"]
        if isinstance(value, str):
            value = value.encode("utf-8")
        ctx.kv.put(arg["key"], value)
        return None
    if name == "kvget":
        if ctx.kv is None:
            raise ExecutionError("no kv store configured on this endpoint")
        return ctx.kv.get(arg if isinstance(arg, str) else arg["key"])
    if name == "stage_read":
        name_in_workdir = arg if isinstance(arg, str) else arg["path"]
        target = ctx.workdir / Path(name_in_workdir).name
        if not target.exists():
            raise ExecutionError(f"staged file {name_in_workdir} not found")
        return target.read_bytes()
    raise UnknownBuiltin(name)


def _process(spec: dict, arg: Any, ctx: ExecutionContext) -> Any:
    argv = list(spec.get("argv", []))
    stdin = b""
    if isinstance(arg, dict):
        argv += [str(a) for a in arg.get("args", [])]
        raw = arg.get("stdin", "")
        stdin = raw.encode("utf-8") if isinstance(raw, str) else bytes(raw)
    if not argv:
        raise ExecutionError("process spec has no argv")
    proc = subprocess.run(
        argv,
        input=stdin,
        capture_output=True,
        cwd=ctx.workdir,
        timeout=spec.get("timeout", 300),
    )
    if proc.returncode != 0:
        raise NonZeroExit(proc.returncode, proc.stderr.decode("utf-8", "replace"))
    return {
        "stdout": proc.stdout.decode("utf-8", "replace"),
        "exit_code": proc.returncode,
    }


def execute(body: Any, input_value: Any, ctx: ExecutionContext) -> ExecutionOutcome:
    """Run one task. exec_s brackets execution only; staging is separate."""
    if not isinstance(body, dict) or "kind" not in body:
        raise ExecutionError("function body is not an executable spec")

    staging_s = 0.0
    arg = input_value
    refs_out: list[TransferReference] = []
    if isinstance(input_value, dict) and (
        "stage_in" in input_value or "stage_out" in input_value
    ):
        refs_in = [TransferReference.from_json(r) for r in input_value.get("stage_in", [])]
        refs_out = [TransferReference.from_json(r) for r in input_value.get("stage_out", [])]
        staging_s += stage_in(refs_in, ctx.workdir)
        arg = input_value.get("data")

    kind = body["kind"]
    start = time.monotonic()
    if kind == "builtin":
        value = _builtin(body.get("name", ""), arg, ctx)
    elif kind == "process":
        value = _process(body, arg, ctx)
    else:
        raise ExecutionError(f"unknown execution kind {kind!r}")
    exec_s = time.monotonic() - start

    if refs_out:
        staging_s += stage_out(refs_out, ctx.workdir)
    return ExecutionOutcome(value=value, exec_s=exec_s, staging_s=staging_s)
