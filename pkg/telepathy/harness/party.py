"""
Party processes for Telepathy.

A party connects to the referee, announces its index and answers every delivered event
(INPUT, PEER_DELIVER, DEADLINE) with zero or more PEER/EQUERY messages followed by
OUTPUT, or WAIT when it has nothing to output yet.
"""

import asyncio
import json
import logging
from collections import deque
from pathlib import Path
from typing import Annotated, Deque, Dict, List, Literal, Optional, Sequence, Set, Union

from pydantic import BaseModel, Field, TypeAdapter

from telepathy.config.config import parse_address
from telepathy.harness.protocol import (
    Channel,
    Deadline,
    EAnswer,
    End,
    EQuery,
    Error,
    Hello,
    Input,
    Output,
    Peer,
    PeerDeliver,
    Result,
    Wait,
)
from telepathy.models.errors import PartyDisconnected, ProtocolViolation, SpecInvalid
from telepathy.models.models import (
    DeterministicStrategy,
    LCDeterministicStrategy,
    ValidatedGame,
)

# Referee errors after which the connection is useless
FATAL_ERRORS = {"expected-hello", "proto-version", "bad-party"}


class PartyStrategy:
    """Reacts to round events with protocol messages."""

    def __init__(self, party: int):
        self.party = party
        self.logger = logging.getLogger(f"telepathy.harness.party.{party}")

    def on_input(self, round_id: int, label: str) -> List[BaseModel]:
        raise NotImplementedError

    def on_peer(self, round_id: int, source: int, payload: str) -> List[BaseModel]:
        return []

    def on_deadline(self, round_id: int) -> List[BaseModel]:
        return []

    def on_answer(self, round_id: int, output: str) -> List[BaseModel]:
        return []

    def end_round(self, round_id: int) -> None:
        pass


class DeterministicParty(PartyStrategy):
    """Answers each input from a fixed table."""

    def __init__(self, party: int, table: Dict[str, str]):
        super().__init__(party)
        self.table = dict(table)

    def on_input(self, round_id: int, label: str) -> List[BaseModel]:
        if label not in self.table:
            self.logger.error(f"No output for input '{label}' in round {round_id}")
            return []
        return [Output(round=round_id, output=self.table[label])]


class RelayParty(PartyStrategy):
    """
    LC strategy: forwards its input to `forward_to`, outputs from `table` once every
    party in `view` is known, and falls back to `fallback` (own input only) at the
    deadline.
    """

    def __init__(
        self,
        party: int,
        forward_to: Sequence[int],
        view: Sequence[int],
        table: Dict[str, str],
        fallback: Dict[str, str],
    ):
        super().__init__(party)
        if party not in view:
            raise SpecInvalid(f"Relay party {party} must be part of its own view {list(view)}")
        self.forward_to = list(forward_to)
        self.view = list(view)
        self.table = dict(table)
        self.fallback = dict(fallback)
        self.known: Dict[int, Dict[int, str]] = {}

    def _ready(self, round_id: int) -> List[BaseModel]:
        known = self.known.get(round_id, {})
        if any(k not in known for k in self.view):
            return []
        key = ",".join(known[k] for k in self.view)
        if key not in self.table:
            self.logger.error(f"No output for view '{key}' in round {round_id}")
            return []
        return [Output(round=round_id, output=self.table[key])]

    def on_input(self, round_id: int, label: str) -> List[BaseModel]:
        self.known[round_id] = {self.party: label}
        peers = [Peer(round=round_id, to=k, payload=label) for k in self.forward_to]
        return peers + self._ready(round_id)

    def on_peer(self, round_id: int, source: int, payload: str) -> List[BaseModel]:
        if round_id not in self.known or source not in self.view:
            return []
        self.known[round_id][source] = payload
        return self._ready(round_id)

    def on_deadline(self, round_id: int) -> List[BaseModel]:
        own = self.known.get(round_id, {}).get(self.party)
        if own is None or own not in self.fallback:
            self.logger.error(f"No fallback output in round {round_id}")
            return []
        return [Output(round=round_id, output=self.fallback[own])]

    def end_round(self, round_id: int) -> None:
        self.known.pop(round_id, None)


class EntangledParty(PartyStrategy):
    """Measures its share of the referee-hosted entanglement with its input."""

    def on_input(self, round_id: int, label: str) -> List[BaseModel]:
        return [EQuery(round=round_id, input=label)]

    def on_answer(self, round_id: int, output: str) -> List[BaseModel]:
        return [Output(round=round_id, output=output)]


# --- strategy files ---


class DeterministicStrategyFile(BaseModel):
    kind: Literal["deterministic"]
    party: int = Field(ge=0)
    table: Dict[str, str]


class RelayStrategyFile(BaseModel):
    kind: Literal["relay"]
    party: int = Field(ge=0)
    forward_to: List[int] = Field(default_factory=list)
    view: List[int]
    table: Dict[str, str]
    fallback: Dict[str, str]


class EntangledStrategyFile(BaseModel):
    kind: Literal["entangled"]
    party: int = Field(ge=0)


StrategyFile = Annotated[
    Union[DeterministicStrategyFile, RelayStrategyFile, EntangledStrategyFile],
    Field(discriminator="kind"),
]

_strategy_adapter = TypeAdapter(StrategyFile)


def strategy_from_dict(data: dict) -> PartyStrategy:
    """
    Build a party strategy from its JSON form.

    Args:
        data: Decoded strategy file

    Returns:
        PartyStrategy: Strategy for party_run
    """
    spec = _strategy_adapter.validate_python(data)
    if isinstance(spec, DeterministicStrategyFile):
        return DeterministicParty(spec.party, spec.table)
    if isinstance(spec, RelayStrategyFile):
        return RelayParty(spec.party, spec.forward_to, spec.view, spec.table, spec.fallback)
    return EntangledParty(spec.party)


def load_party_strategy(path: Union[str, Path]) -> PartyStrategy:
    return strategy_from_dict(json.loads(Path(path).read_text()))


def deterministic_party_files(game: ValidatedGame, strategy: DeterministicStrategy) -> List[dict]:
    labels = strategy.to_labels(game)
    return [
        {"kind": "deterministic", "party": party, "table": labels[str(party)]}
        for party in range(game.n_parties)
    ]


def lc_witness_party_files(
    game: ValidatedGame, witness: LCDeterministicStrategy, fallback: DeterministicStrategy
) -> List[dict]:
    """
    Relay strategy files playing an LC witness.

    Party j forwards its input to every party whose view contains j. When peer inputs
    miss the deadline, each party plays `fallback`.

    Args:
        game: Game providing the labels
        witness: LC deterministic strategy
        fallback: Strategy on own inputs only, usually the classical witness

    Returns:
        List[dict]: One strategy file per party
    """
    tables = witness.to_labels(game)
    fallbacks = fallback.to_labels(game)
    files = []
    for party, view in enumerate(witness.views):
        forward_to = [k for k, other in enumerate(witness.views) if k != party and party in other]
        files.append(
            {
                "kind": "relay",
                "party": party,
                "forward_to": forward_to,
                "view": list(view),
                "table": tables[str(party)],
                "fallback": fallbacks[str(party)],
            }
        )
    return files


def entangled_party_files(n_parties: int) -> List[dict]:
    return [{"kind": "entangled", "party": party} for party in range(n_parties)]


def dump_party_files(files: Sequence[dict], prefix: Union[str, Path]) -> List[Path]:
    """Write `<prefix>.party<j>.json` per file and return the paths."""
    paths = []
    for data in files:
        path = Path(f"{prefix}.party{data['party']}.json")
        path.write_text(json.dumps(data, sort_keys=True, indent=2) + "\n")
        paths.append(path)
    return paths


# --- process loop ---


async def party_run(endpoint: str, strategy: PartyStrategy) -> Optional[End]:
    """
    Connect to a referee and play until it sends END.

    Args:
        endpoint: Referee host:port
        strategy: How to react to round events

    Returns:
        Optional[End]: Final summary sent by the referee
    """
    logger = logging.getLogger("telepathy.harness.party")
    host, port = parse_address(endpoint)
    reader, writer = await asyncio.open_connection(host, port)
    channel = Channel(reader, writer, name="referee")
    await channel.send(Hello(party=strategy.party))
    logger.info(f"Party {strategy.party} connected to {host}:{port}")

    committed: Set[int] = set()
    backlog: Deque[BaseModel] = deque()

    async def receive() -> BaseModel:
        message = await channel.receive()
        if message is None:
            raise PartyDisconnected(strategy.party, "Referee closed the connection")
        return message

    async def next_message() -> BaseModel:
        return backlog.popleft() if backlog else await receive()

    async def react(round_id: int, actions: List[BaseModel]) -> None:
        queue = deque(actions)
        while queue:
            action = queue.popleft()
            await channel.send(action)
            if isinstance(action, Output):
                committed.add(round_id)
            elif isinstance(action, EQuery):
                # Anything else arriving before the answer is handled afterwards
                while True:
                    message = await receive()
                    if isinstance(message, EAnswer) and message.round == round_id:
                        queue.extend(strategy.on_answer(round_id, message.output))
                        break
                    backlog.append(message)
                    if isinstance(message, (Error, Result, End)):
                        return
        if round_id not in committed:
            await channel.send(Wait(round=round_id))

    try:
        while True:
            message = await next_message()
            if isinstance(message, End):
                logger.info(
                    f"Party {strategy.party} done: mean utility {message.mean:.6f} "
                    f"(std err {message.std_err:.2e})"
                )
                return message
            if isinstance(message, Error):
                logger.warning(f"Referee error {message.code}: {message.msg}")
                if message.code in FATAL_ERRORS:
                    raise ProtocolViolation(message.msg, code=message.code, party=strategy.party)
                continue
            if isinstance(message, Result):
                strategy.end_round(message.round)
                committed.discard(message.round)
                continue
            if isinstance(message, Input):
                actions = strategy.on_input(message.round, message.input)
            elif isinstance(message, PeerDeliver):
                if message.round in committed:
                    continue
                actions = strategy.on_peer(message.round, message.source, message.payload)
            elif isinstance(message, Deadline):
                if message.round in committed:
                    continue
                actions = strategy.on_deadline(message.round)
            else:
                logger.warning(f"Ignoring unexpected {message.t} from the referee")
                continue
            await react(message.round, actions)
    finally:
        await channel.wait_closed()
