"""Framed wire protocol shared by service, agent, and node runtime.

Frame layout, bit-exact: 4-byte big-endian length prefix counting
everything after itself, then a 1-byte message type tag, then the body.
A Heartbeat with an empty body is therefore exactly 5 bytes.

Message bodies are a 4-byte big-endian JSON-header length, the JSON
header, and an optional raw byte tail (used to carry Envelope bytes
without base64 inflation).  ``frame_decode`` is a pure function over a
caller-owned buffer; partial input reports "need more bytes" without
consuming anything.
"""
from __future__ import annotations

import enum
import json
import struct
from dataclasses import dataclass
from typing import Any, Optional, Tuple

# Transport-level cap; distinct from the 10 MiB service payload policy,
# since intra-endpoint traffic may legitimately exceed that.
MAX_FRAME = 64 * 1024 * 1024

_LEN = struct.Struct(">I")


class FramingError(Exception):
    pass


class OversizeFrame(FramingError):
    pass


class UnknownMessageType(FramingError):
    pass


class MalformedBody(FramingError):
    pass


class MessageType(enum.IntEnum):
    REGISTER_ENDPOINT = 1
    REGISTER_MANAGER = 2
    HEARTBEAT = 3
    TASK_DISPATCH = 4
    TASK_RESULT = 5
    ACK = 6
    ADVERTISEMENT = 7
    DRAIN = 8


@dataclass(frozen=True)
class WireMessage:
    type: MessageType
    body: bytes = b""

    @classmethod
    def build(cls, mtype: MessageType, header: dict[str, Any], tail: bytes = b"") -> "WireMessage":
        raw = json.dumps(header, separators=(",", ":")).encode("utf-8")
        return cls(mtype, _LEN.pack(len(raw)) + raw + tail)

    def unpack(self) -> Tuple[dict[str, Any], bytes]:
        """Split the body into its JSON header and raw tail."""
        if len(self.body) < 4:
            raise MalformedBody("body shorter than header length field")
        (hlen,) = _LEN.unpack_from(self.body, 0)
        if 4 + hlen > len(self.body):
            raise MalformedBody("header length exceeds body")
        try:
            header = json.loads(self.body[4 : 4 + hlen].decode("utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise MalformedBody(str(exc)) from exc
        return header, self.body[4 + hlen :]


def frame_encode(msg: WireMessage) -> bytes:
    inner = len(msg.body) + 1
    if inner > MAX_FRAME:
        raise OversizeFrame(f"frame of {inner} bytes exceeds {MAX_FRAME}")
    return _LEN.pack(inner) + bytes([msg.type]) + msg.body


def frame_decode(buf: bytes) -> Tuple[Optional[WireMessage], bytes]:
    """Decode one frame from ``buf``.

    Returns ``(message, remainder)``, or ``(None, buf)`` when more bytes
    are needed.  Raises OversizeFrame / UnknownMessageType on garbage;
    the caller owns the buffer either way.
    """
    if len(buf) < 4:
        return None, buf
    (inner,) = _LEN.unpack_from(buf, 0)
    if inner > MAX_FRAME:
        raise OversizeFrame(f"declared frame of {inner} bytes exceeds {MAX_FRAME}")
    if inner < 1:
        raise UnknownMessageType("frame missing type tag")
    if len(buf) < 4 + inner:
        return None, buf
    tag = buf[4]
    try:
        mtype = MessageType(tag)
    except ValueError:
        raise UnknownMessageType(f"message type tag {tag}") from None
    body = bytes(buf[5 : 4 + inner])
    return WireMessage(mtype, body), bytes(buf[4 + inner :])


class FrameDecoder:
    """Incremental decoder accumulating a stream into whole messages."""

    def __init__(self) -> None:
        self._buf = b""

    def feed(self, data: bytes) -> list[WireMessage]:
        self._buf += data
        out: list[WireMessage] = []
        while True:
            msg, rest = frame_decode(self._buf)
            if msg is None:
                break
            self._buf = rest
            out.append(msg)
        return out
