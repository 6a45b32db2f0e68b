"""Round-trip and corruption checks for the wire encoding."""

import pytest
from hypothesis import given, strategies as st

from phalanx import Command, EMPTY_DIGEST, HmacAuthenticator, PartialOrderLog
from phalanx.consensus import decode_order_batch, encode_order_batch
from phalanx.wire import (
    FetchCommandMessage,
    FetchCommandResponse,
    FetchLogMessage,
    FetchLogResponse,
    OrderMessage,
    PreOrderMessage,
    VoteMessage,
    WireError,
    decode_message,
    encode_message,
)

AUTH = HmacAuthenticator(4, 1)


def certified_log(node_id=2, seq=1, ts=17, payload=b"cmd"):
    cmd = Command.create(0, 1, payload)
    log = PartialOrderLog.create(node_id, seq, ts, cmd.digest, EMPTY_DIGEST)
    shares = [AUTH.partial_sign(s, log.cur_digest) for s in range(3)]
    return log.with_certificate(AUTH.aggregate(log.cur_digest, shares))


@given(st.integers(0, 99), st.integers(1, 2**31), st.binary(max_size=128))
def test_command_roundtrip(proposer, seq, payload):
    cmd = Command.create(proposer, seq, payload)
    decoded = decode_message(encode_message(FetchCommandResponse(cmd)))
    assert isinstance(decoded, FetchCommandResponse)
    assert decoded.command == cmd


def test_pre_order_roundtrip_strips_certificate():
    log = certified_log()
    decoded = decode_message(encode_message(PreOrderMessage(log)))
    assert isinstance(decoded, PreOrderMessage)
    assert decoded.log.certificate is None
    assert decoded.log.cur_digest == log.cur_digest


def test_order_roundtrip_preserves_certificate():
    log = certified_log()
    decoded = decode_message(encode_message(OrderMessage(log)))
    assert isinstance(decoded, OrderMessage)
    assert decoded.log == log
    assert AUTH.verify_certificate(decoded.log.certificate)


def test_vote_roundtrip():
    log = certified_log()
    partial = AUTH.partial_sign(1, log.cur_digest)
    decoded = decode_message(encode_message(VoteMessage(log.cur_digest, partial)))
    assert isinstance(decoded, VoteMessage)
    assert decoded.digest == log.cur_digest
    assert decoded.partial == partial


def test_fetch_messages_roundtrip():
    fetch = decode_message(encode_message(FetchLogMessage(3, 42)))
    assert fetch == FetchLogMessage(3, 42)
    log = certified_log()
    resp = decode_message(encode_message(FetchLogResponse(log)))
    assert resp.log == log
    cmd_fetch = decode_message(encode_message(FetchCommandMessage(log.command_digest)))
    assert cmd_fetch == FetchCommandMessage(log.command_digest)


def test_order_batch_roundtrip():
    logs = [certified_log(node_id=i, seq=1, ts=i) for i in range(3)]
    batch = (logs[0], None, logs[1], logs[2])
    assert decode_order_batch(encode_order_batch(batch)) == batch


def test_truncated_message_raises():
    log = certified_log()
    encoded = encode_message(OrderMessage(log))
    with pytest.raises(WireError):
        decode_message(encoded[: len(encoded) // 2])


def test_unknown_kind_raises():
    with pytest.raises(WireError):
        decode_message(b"\xff\x00\x01")


def test_empty_message_raises():
    with pytest.raises(WireError):
        decode_message(b"")


def test_bad_batch_flag_raises():
    with pytest.raises(WireError):
        decode_order_batch(b"\x00\x01\x02")
