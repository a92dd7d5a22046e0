from fedfaas.protocol.codecs import (
    AllCodecsFailed,
    BinaryCodec,
    Codec,
    CorruptPayload,
    Envelope,
    TextCodec,
    UnknownCodec,
    default_codecs,
    deserialize,
    serialize,
)
from fedfaas.protocol.framing import (
    FrameDecoder,
    MessageType,
    OversizeFrame,
    UnknownMessageType,
    WireMessage,
    frame_decode,
    frame_encode,
)
from fedfaas.protocol.records import (
    EndpointRecord,
    EndpointStatus,
    FunctionRecord,
    IllegalTransition,
    LatencyBreakdown,
    TaskRecord,
    TaskState,
)

__all__ = [
    "AllCodecsFailed",
    "BinaryCodec",
    "Codec",
    "CorruptPayload",
    "Envelope",
    "TextCodec",
    "UnknownCodec",
    "default_codecs",
    "deserialize",
    "serialize",
    "FrameDecoder",
    "MessageType",
    "OversizeFrame",
    "UnknownMessageType",
    "WireMessage",
    "frame_decode",
    "frame_encode",
    "EndpointRecord",
    "EndpointStatus",
    "FunctionRecord",
    "IllegalTransition",
    "LatencyBreakdown",
    "TaskRecord",
    "TaskState",
]
