import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedfaas.protocol import (
    FrameDecoder,
    MessageType,
    OversizeFrame,
    UnknownMessageType,
    WireMessage,
    frame_decode,
    frame_encode,
)
from fedfaas.protocol.framing import FramingError, MAX_FRAME


def test_heartbeat_is_five_bytes():
    frame = frame_encode(WireMessage(MessageType.HEARTBEAT))
    assert len(frame) == 5
    msg, rest = frame_decode(frame)
    assert msg == WireMessage(MessageType.HEARTBEAT) and rest == b""


def test_partial_input_consumes_nothing():
    frame = frame_encode(WireMessage(MessageType.ACK, b"abcdef"))
    for cut in range(len(frame)):
        msg, rest = frame_decode(frame[:cut])
        assert msg is None
        assert rest == frame[:cut]


def test_two_frames_decode_in_order():
    a = WireMessage(MessageType.TASK_DISPATCH, b"one")
    b = WireMessage(MessageType.TASK_RESULT, b"two")
    stream = frame_encode(a) + frame_encode(b)
    m1, rest = frame_decode(stream)
    m2, rest = frame_decode(rest)
    assert (m1, m2) == (a, b) and rest == b""


def test_oversize_frame_rejected():
    raw = (MAX_FRAME + 1).to_bytes(4, "big") + b"\x03"
    with pytest.raises(OversizeFrame):
        frame_decode(raw)


def test_unknown_message_type():
    raw = (1).to_bytes(4, "big") + b"\xfa"
    with pytest.raises(UnknownMessageType):
        frame_decode(raw)


def test_body_header_roundtrip():
    msg = WireMessage.build(MessageType.TASK_DISPATCH, {"task_id": "t1"}, b"tail")
    header, tail = msg.unpack()
    assert header == {"task_id": "t1"} and tail == b"tail"


def test_fuzz_random_bytes_never_crash():
    rng = random.Random(1234)
    for _ in range(2000):
        blob = rng.randbytes(rng.randint(0, 64))
        try:
            msg, rest = frame_decode(blob)
        except FramingError:
            continue
        assert msg is None or isinstance(msg.type, MessageType)


@given(st.binary(max_size=256))
@settings(max_examples=300)
def test_fuzz_property(blob):
    decoder = FrameDecoder()
    try:
        decoder.feed(blob)
    except FramingError:
        pass


@given(
    st.lists(
        st.tuples(st.sampled_from(list(MessageType)), st.binary(max_size=128)),
        max_size=8,
    ),
    st.integers(min_value=1, max_value=7),
)
def test_stream_reassembly(messages, chunk):
    stream = b"".join(frame_encode(WireMessage(t, b)) for t, b in messages)
    decoder = FrameDecoder()
    got = []
    for i in range(0, len(stream), chunk):
        got.extend(decoder.feed(stream[i : i + chunk]))
    assert [(m.type, m.body) for m in got] == messages
