import json

import pytest

from telepathy.harness.protocol import (
    PROTO_VERSION,
    EQuery,
    Hello,
    Output,
    PeerDeliver,
    encode_message,
    parse_message,
)
from telepathy.models.errors import ProtocolViolation


def test_hello_defaults_to_current_version():
    hello = parse_message({"t": "HELLO", "party": 1})
    assert isinstance(hello, Hello)
    assert hello.proto == PROTO_VERSION


def test_peer_deliver_uses_from_on_the_wire():
    message = PeerDeliver(round=3, source=0, payload="1", at_s=0.5)
    wire = json.loads(encode_message(message))
    assert wire == {"t": "PEER_DELIVER", "round": 3, "from": 0, "payload": "1", "at_s": 0.5}
    assert parse_message(wire).source == 0


def test_encoding_is_one_sorted_line():
    line = encode_message(Output(round=1, output="buy"))
    assert line.endswith(b"\n") and line.count(b"\n") == 1
    assert line == b'{"output": "buy", "round": 1, "t": "OUTPUT"}\n'


def test_unknown_fields_are_ignored():
    message = parse_message({"t": "EQUERY", "round": 2, "input": "0", "extra": True})
    assert message == EQuery(round=2, input="0")


@pytest.mark.parametrize(
    "data",
    [
        {"t": "SHOUT", "round": 0},
        {"t": "OUTPUT", "round": 0},
        {"round": 0, "output": "1"},
        ["OUTPUT"],
    ],
)
def test_malformed_messages(data):
    with pytest.raises(ProtocolViolation):
        parse_message(data)
