"""
Wire protocol for Telepathy.

Newline-delimited JSON over TCP. Every message is a JSON object whose `t` field names
its type. Unknown fields are ignored; the protocol version is checked at HELLO.
"""

import asyncio
import json
import logging
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError

from telepathy.models.errors import PartyDisconnected, ProtocolViolation

PROTO_VERSION = 1


class _Message(BaseModel):
    model_config = ConfigDict(extra="ignore", populate_by_name=True)


class Hello(_Message):
    t: Literal["HELLO"] = "HELLO"
    party: int
    proto: int = PROTO_VERSION


class Input(_Message):
    t: Literal["INPUT"] = "INPUT"
    round: int
    input: str
    deadline_s: float


class Output(_Message):
    t: Literal["OUTPUT"] = "OUTPUT"
    round: int
    output: str


class Wait(_Message):
    t: Literal["WAIT"] = "WAIT"
    round: int


class Peer(_Message):
    t: Literal["PEER"] = "PEER"
    round: int
    to: int
    payload: str


class PeerDeliver(_Message):
    t: Literal["PEER_DELIVER"] = "PEER_DELIVER"
    round: int
    source: int = Field(alias="from")
    payload: str
    at_s: float


class Deadline(_Message):
    t: Literal["DEADLINE"] = "DEADLINE"
    round: int
    at_s: float


class EQuery(_Message):
    t: Literal["EQUERY"] = "EQUERY"
    round: int
    input: str


class EAnswer(_Message):
    t: Literal["EANSWER"] = "EANSWER"
    round: int
    output: str


class Result(_Message):
    t: Literal["RESULT"] = "RESULT"
    round: int
    utility: float


class End(_Message):
    t: Literal["END"] = "END"
    mean: float
    std_err: float


class Error(_Message):
    t: Literal["ERROR"] = "ERROR"
    code: str
    msg: str


Message = Annotated[
    Union[
        Hello,
        Input,
        Output,
        Wait,
        Peer,
        PeerDeliver,
        Deadline,
        EQuery,
        EAnswer,
        Result,
        End,
        Error,
    ],
    Field(discriminator="t"),
]

_adapter = TypeAdapter(Message)


def parse_message(data: object) -> BaseModel:
    """
    Decode one JSON object into its message model.

    Args:
        data: Decoded JSON value

    Returns:
        BaseModel: Message instance
    """
    try:
        return _adapter.validate_python(data)
    except ValidationError as e:
        raise ProtocolViolation(f"Malformed message {data!r}: {e.errors()[0]['msg']}") from e


def encode_message(message: BaseModel) -> bytes:
    return json.dumps(message.model_dump(by_alias=True), sort_keys=True).encode() + b"\n"


class Channel:
    """
    One side of a newline-delimited JSON connection.
    """

    def __init__(
        self,
        reader: asyncio.StreamReader,
        writer: asyncio.StreamWriter,
        name: str = "peer",
    ):
        self.reader = reader
        self.writer = writer
        self.name = name
        self.logger = logging.getLogger("telepathy.harness.protocol")

    async def readline(self) -> Optional[str]:
        try:
            line = await self.reader.readline()
        except ValueError as e:
            # Raised by readline for lines over the stream limit
            raise ProtocolViolation(f"{self.name} sent an oversized line: {e}") from e
        if not line:
            self.close()
            return None
        try:
            return line.rstrip(b"\r\n").decode()
        except UnicodeDecodeError as e:
            raise ProtocolViolation(f"{self.name} sent a line that is not UTF-8: {e}") from e

    async def receive(self) -> Optional[BaseModel]:
        """
        Next message, or None once the connection is closed.
        """
        if (plaintext := await self.readline()) is None:
            return None
        try:
            data = json.loads(plaintext)
        except json.JSONDecodeError as e:
            raise ProtocolViolation(f"{self.name} sent invalid JSON: {e}") from e
        message = parse_message(data)
        return message

    async def expect(self) -> BaseModel:
        """Like receive, but a closed connection raises PartyDisconnected."""
        message = await self.receive()
        if message is None:
            raise PartyDisconnected(None, f"{self.name} closed the connection")
        return message

    async def send(self, message: BaseModel) -> None:
        self.writer.write(encode_message(message))
        await self.writer.drain()

    def close(self) -> None:
        if not self.writer.is_closing():
            self.writer.close()

    async def wait_closed(self) -> None:
        self.close()
        try:
            await self.writer.wait_closed()
        except (ConnectionError, OSError):
            pass
