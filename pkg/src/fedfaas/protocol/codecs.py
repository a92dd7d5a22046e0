"""Payload serialization facade.

Values crossing process boundaries are packed into an Envelope: a small
header naming the codec that produced the payload plus a routing tag that
lets intermediaries route the message without deserializing the body.

Two codecs ship built in:

* ``BinaryCodec`` (id 1) -- compact self-describing binary encoding,
  tried first.  Integers are packed as signed 64-bit, so values outside
  that range are rejected and fall through to the next codec.
* ``TextCodec`` (id 2) -- UTF-8 JSON, human-debuggable fallback.  Handles
  arbitrary-precision integers but rejects raw bytes.

``serialize`` walks an ordered codec list and records the first codec that
succeeds; ``deserialize`` uses exactly the recorded codec.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Any, Sequence

MAX_ROUTING_TAG = 0xFFFF

_I64_MIN = -(1 << 63)
_I64_MAX = (1 << 63) - 1


class CodecError(Exception):
    """Base class for serialization failures."""


class EncodeRejected(CodecError):
    """A codec cannot represent the given value; try the next one."""


class AllCodecsFailed(CodecError):
    """No codec in the configured list could encode the value."""


class UnknownCodec(CodecError):
    """Envelope names a codec id that is not registered."""


class CorruptPayload(CodecError):
    """Payload bytes do not decode under the recorded codec."""


@dataclass(frozen=True)
class Envelope:
    """Codec-tagged payload with a routing header.

    Wire layout: 1 byte codec_id, 2-byte big-endian routing_tag length,
    routing_tag bytes, payload bytes.
    """

    codec_id: int
    payload: bytes
    routing_tag: bytes = b""

    def to_bytes(self) -> bytes:
        if not 0 <= self.codec_id <= 0xFF:
            raise ValueError(f"codec_id out of range: {self.codec_id}")
        if len(self.routing_tag) > MAX_ROUTING_TAG:
            raise ValueError("routing_tag exceeds 2-byte length field")
        return (
            struct.pack(">BH", self.codec_id, len(self.routing_tag))
            + self.routing_tag
            + self.payload
        )

    @classmethod
    def from_bytes(cls, raw: bytes) -> "Envelope":
        if len(raw) < 3:
            raise CorruptPayload("envelope header truncated")
        codec_id, tag_len = struct.unpack_from(">BH", raw, 0)
        if len(raw) < 3 + tag_len:
            raise CorruptPayload("routing_tag truncated")
        tag = raw[3 : 3 + tag_len]
        return cls(codec_id=codec_id, routing_tag=tag, payload=raw[3 + tag_len :])


class Codec:
    """One serialization strategy. Stateless; safe for concurrent use."""

    codec_id: int = 0
    name: str = "abstract"

    def encode(self, value: Any) -> bytes:
        raise NotImplementedError

    def decode(self, payload: bytes) -> Any:
        raise NotImplementedError


# Binary type tags.
_T_NONE = 0
_T_TRUE = 1
_T_FALSE = 2
_T_INT = 3
_T_FLOAT = 4
_T_BYTES = 5
_T_STR = 6
_T_LIST = 7
_T_DICT = 8


class BinaryCodec(Codec):
    """Self-describing binary encoding of plain data values.

    Supports None, bool, 64-bit signed int, float, bytes, str, list, and
    dict with str keys.  Anything else (including out-of-range ints) is
    rejected so the facade can fall through to the text codec.
    """

    codec_id = 1
    name = "binary"

    def encode(self, value: Any) -> bytes:
        out = bytearray()
        self._enc(value, out)
        return bytes(out)

    def _enc(self, v: Any, out: bytearray) -> None:
        if v is None:
            out.append(_T_NONE)
        elif v is True:
            out.append(_T_TRUE)
        elif v is False:
            out.append(_T_FALSE)
        elif isinstance(v, int):
            if not _I64_MIN <= v <= _I64_MAX:
                raise EncodeRejected("int outside signed 64-bit range")
            out.append(_T_INT)
            out += struct.pack(">q", v)
        elif isinstance(v, float):
            out.append(_T_FLOAT)
            out += struct.pack(">d", v)
        elif isinstance(v, (bytes, bytearray)):
            out.append(_T_BYTES)
            out += struct.pack(">I", len(v))
            out += v
        elif isinstance(v, str):
            raw = v.encode("utf-8")
            out.append(_T_STR)
            out += struct.pack(">I", len(raw))
            out += raw
        elif isinstance(v, (list, tuple)):
            out.append(_T_LIST)
            out += struct.pack(">I", len(v))
            for item in v:
                self._enc(item, out)
        elif isinstance(v, dict):
            for k in v:
                if not isinstance(k, str):
                    raise EncodeRejected("dict keys must be str")
            out.append(_T_DICT)
            out += struct.pack(">I", len(v))
            for k, item in v.items():
                raw = k.encode("utf-8")
                out += struct.pack(">I", len(raw))
                out += raw
                self._enc(item, out)
        else:
            raise EncodeRejected(f"unsupported type {type(v).__name__}")

    def decode(self, payload: bytes) -> Any:
        try:
            value, offset = self._dec(payload, 0)
        except (struct.error, IndexError, UnicodeDecodeError) as exc:
            raise CorruptPayload(str(exc)) from exc
        if offset != len(payload):
            raise CorruptPayload("trailing bytes after value")
        return value

    def _dec(self, buf: bytes, off: int):
        if off >= len(buf):
            raise CorruptPayload("unexpected end of payload")
        tag = buf[off]
        off += 1
        if tag == _T_NONE:
            return None, off
        if tag == _T_TRUE:
            return True, off
        if tag == _T_FALSE:
            return False, off
        if tag == _T_INT:
            (v,) = struct.unpack_from(">q", buf, off)
            return v, off + 8
        if tag == _T_FLOAT:
            (v,) = struct.unpack_from(">d", buf, off)
            return v, off + 8
        if tag in (_T_BYTES, _T_STR):
            (n,) = struct.unpack_from(">I", buf, off)
            off += 4
            if off + n > len(buf):
                raise CorruptPayload("length field exceeds payload")
            raw = buf[off : off + n]
            off += n
            return (bytes(raw) if tag == _T_BYTES else raw.decode("utf-8")), off
        if tag == _T_LIST:
            (n,) = struct.unpack_from(">I", buf, off)
            off += 4
            items = []
            for _ in range(n):
                item, off = self._dec(buf, off)
                items.append(item)
            return items, off
        if tag == _T_DICT:
            (n,) = struct.unpack_from(">I", buf, off)
            off += 4
            d = {}
            for _ in range(n):
                (klen,) = struct.unpack_from(">I", buf, off)
                off += 4
                if off + klen > len(buf):
                    raise CorruptPayload("key length exceeds payload")
                key = buf[off : off + klen].decode("utf-8")
                off += klen
                d[key], off = self._dec(buf, off)
            return d, off
        raise CorruptPayload(f"unknown type tag {tag}")


class TextCodec(Codec):
    """UTF-8 JSON codec. Fallback for values the binary codec rejects."""

    codec_id = 2
    name = "text"

    def encode(self, value: Any) -> bytes:
        try:
            return json.dumps(value, separators=(",", ":"), allow_nan=False).encode(
                "utf-8"
            )
        except (TypeError, ValueError) as exc:
            raise EncodeRejected(str(exc)) from exc

    def decode(self, payload: bytes) -> Any:
        try:
            return json.loads(payload.decode("utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise CorruptPayload(str(exc)) from exc


def default_codecs() -> list[Codec]:
    """Built-in codec order: fastest first, text fallback last."""
    return [BinaryCodec(), TextCodec()]


def serialize(
    value: Any,
    codecs: Sequence[Codec] | None = None,
    routing_tag: bytes = b"",
) -> Envelope:
    """Encode ``value`` with the first codec in order that succeeds."""
    codecs = list(codecs) if codecs is not None else default_codecs()
    if not codecs:
        raise ValueError("codec list must be nonempty")
    failures = []
    for codec in codecs:
        try:
            payload = codec.encode(value)
        except EncodeRejected as exc:
            failures.append(f"{codec.name}: {exc}")
            continue
        return Envelope(codec_id=codec.codec_id, payload=payload, routing_tag=routing_tag)
    raise AllCodecsFailed("; ".join(failures))


def deserialize(envelope: Envelope, codecs: Sequence[Codec] | None = None) -> Any:
    """Decode an envelope with exactly the codec recorded in its header."""
    codecs = list(codecs) if codecs is not None else default_codecs()
    for codec in codecs:
        if codec.codec_id == envelope.codec_id:
            return codec.decode(envelope.payload)
    raise UnknownCodec(f"codec id {envelope.codec_id} not registered")
