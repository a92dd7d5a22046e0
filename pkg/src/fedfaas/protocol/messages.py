"""Typed wire-message builders/parsers shared by all three tiers.

TaskDispatch carries the function body envelope and the input envelope in
the raw tail (4-byte big-endian body-envelope length, body envelope,
input envelope) so intermediaries forward bytes without re-encoding.
"""
from __future__ import annotations

import struct
from typing import Any, Optional, Tuple

from fedfaas.protocol.framing import MessageType, WireMessage

_LEN = struct.Struct(">I")


def task_dispatch(
    task_id: str,
    function_id: str,
    container_type: Optional[str],
    attempts: int,
    allow_reexecution: bool,
    body_env: bytes,
    input_env: bytes,
) -> WireMessage:
    header = {
        "task_id": task_id,
        "function_id": function_id,
        "container_type": container_type,
        "attempts": attempts,
        "allow_reexecution": allow_reexecution,
    }
    tail = _LEN.pack(len(body_env)) + body_env + input_env
    return WireMessage.build(MessageType.TASK_DISPATCH, header, tail)


def parse_task_dispatch(msg: WireMessage) -> Tuple[dict, bytes, bytes]:
    header, tail = msg.unpack()
    (blen,) = _LEN.unpack_from(tail, 0)
    return header, tail[4 : 4 + blen], tail[4 + blen :]


def task_result(
    task_id: str,
    success: bool,
    error: Optional[str] = None,
    t_e_ns: int = 0,
    t_w_ns: int = 0,
    staging_ns: int = 0,
    result_env: bytes = b"",
    attempts: Optional[int] = None,
) -> WireMessage:
    header = {
        "task_id": task_id,
        "success": success,
        "error": error,
        "t_e_ns": t_e_ns,
        "t_w_ns": t_w_ns,
        "staging_ns": staging_ns,
    }
    if attempts is not None:
        header["attempts"] = attempts
    return WireMessage.build(MessageType.TASK_RESULT, header, result_env)


def parse_task_result(msg: WireMessage) -> Tuple[dict, bytes]:
    return msg.unpack()


def ack(task_id: str) -> WireMessage:
    return WireMessage.build(MessageType.ACK, {"task_id": task_id})


def heartbeat(sender: str = "") -> WireMessage:
    return WireMessage.build(MessageType.HEARTBEAT, {"from": sender})


def simple(mtype: MessageType, header: dict[str, Any]) -> WireMessage:
    return WireMessage.build(mtype, header)
