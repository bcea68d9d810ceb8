"""
Referee for Telepathy.

Serves rounds of a game to connected party processes and enforces the latency
constraint: PEER messages are relayed only if they arrive before the output deadline.

Two clocks are available. The logical clock is a discrete-event simulation: every round
starts at t = 0, parties react to each delivered event, and relayed messages arrive at
send time plus link latency. It is deterministic for a fixed seed. The wall clock uses
the event loop's monotonic time and real timers, for demonstrations.
"""

import asyncio
import heapq
import itertools
import json
import logging
from dataclasses import dataclass, field
from functools import partial
from typing import Dict, List, Literal, Optional, Set, Tuple

import numpy as np

from telepathy.config.config import parse_address
from telepathy.game.core import joint_input_index
from telepathy.game.indexing import flatten, unflatten
from telepathy.harness.entanglement import EntanglementSession, entanglement_query
from telepathy.harness.montecarlo import mean_and_std_err
from telepathy.harness.protocol import (
    PROTO_VERSION,
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
from telepathy.latency.model import LatencyScenario, latency_matrix
from telepathy.models.errors import (
    DuplicateQuery,
    HarnessError,
    LateOutputAbort,
    PartyDisconnected,
    ProtocolViolation,
    ShapeMismatch,
    SpecInvalid,
)
from telepathy.models.models import Behavior, PeerEvent, RoundRecord, ValidatedGame

Mode = Literal["classical", "entangled"]
Clock = Literal["logical", "wall"]
LatePolicy = Literal["zero", "accept", "abort"]


@dataclass
class SessionReport:
    """Outcome of a refereed run."""

    mode: str
    clock: str
    late_policy: str
    seed: int
    deadline_s: float
    rounds: List[RoundRecord] = field(default_factory=list)
    mean: float = 0.0
    std_err: float = 0.0
    late: int = 0
    missing: int = 0
    dropped_peers: int = 0
    protocol_errors: int = 0
    stale_messages: int = 0
    aborted: bool = False

    @property
    def n_rounds(self) -> int:
        return len(self.rounds)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "clock": self.clock,
            "late_policy": self.late_policy,
            "seed": self.seed,
            "deadline_s": self.deadline_s,
            "n_rounds": self.n_rounds,
            "mean": self.mean,
            "std_err": self.std_err,
            "late": self.late,
            "missing": self.missing,
            "dropped_peers": self.dropped_peers,
            "protocol_errors": self.protocol_errors,
            "stale_messages": self.stale_messages,
            "aborted": self.aborted,
            "rounds": [record.to_dict() for record in self.rounds],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


class Referee:
    """
    Hosts one run: accepts one connection per party, then plays `n_rounds` rounds.
    """

    def __init__(
        self,
        game: ValidatedGame,
        scenario: LatencyScenario,
        mode: Mode = "classical",
        behavior: Optional[Behavior] = None,
        n_rounds: int = 1000,
        seed: int = 0,
        late_policy: LatePolicy = "zero",
        clock: Clock = "logical",
        listen: str = "127.0.0.1:7643",
        response_timeout: float = 10.0,
    ):
        """
        Initialize a Referee.

        Args:
            game: Game to referee
            scenario: Latencies and output deadline
            mode: "classical", or "entangled" to host an entanglement session
            behavior: Shared behavior for entangled mode
            n_rounds: Rounds to play
            seed: Seed of the generator drawing inputs and entangled outcomes
            late_policy: "zero", "accept" or "abort" for late or missing outputs
            clock: "logical" or "wall"
            listen: host:port to accept parties on, port 0 for any free port
            response_timeout: Seconds to wait for a party's reaction
        """
        self.logger = logging.getLogger("telepathy.harness.referee")
        self.latencies = latency_matrix(scenario)
        if len(self.latencies) != game.n_parties:
            raise ShapeMismatch(
                f"Scenario has {len(self.latencies)} parties, game has {game.n_parties}"
            )
        if n_rounds < 1:
            raise SpecInvalid(f"Need at least one round, got {n_rounds}")
        self.game = game
        self.deadline = scenario.deadline_s
        self.mode = mode
        self.n_rounds = n_rounds
        self.seed = seed
        self.late_policy = late_policy
        self.clock = clock
        self.listen = listen
        self.response_timeout = response_timeout
        self.rng = np.random.default_rng(seed)

        self.session: Optional[EntanglementSession] = None
        if mode == "entangled":
            if behavior is None:
                raise SpecInvalid("Entangled mode needs a behavior")
            self.session = EntanglementSession.for_game(game, behavior, rng=self.rng)

        self.channels: Dict[int, Channel] = {}
        self.queues: Dict[int, asyncio.Queue] = {}
        self.disconnected: Set[int] = set()
        self.server: Optional[asyncio.Server] = None
        self._ready: Optional[asyncio.Event] = None
        self.report = SessionReport(mode, clock, late_policy, seed, self.deadline)

    @property
    def n_parties(self) -> int:
        return self.game.n_parties

    # --- connections ---

    async def start(self) -> Tuple[str, int]:
        """
        Bind the listening socket.

        Returns:
            Tuple[str, int]: Bound host and port
        """
        host, port = parse_address(self.listen)
        self._ready = asyncio.Event()
        self.server = await asyncio.start_server(self._handle_connection, host, port)
        bound = self.server.sockets[0].getsockname()
        self.logger.info(
            f"Referee listening on {bound[0]}:{bound[1]} for {self.n_parties} parties "
            f"({self.mode}, {self.clock} clock)"
        )
        return bound[0], bound[1]

    async def _handle_connection(self, reader, writer) -> None:
        channel = Channel(reader, writer, name="connection")
        try:
            hello = await asyncio.wait_for(channel.expect(), self.response_timeout)
        except (HarnessError, asyncio.TimeoutError) as e:
            self.logger.warning(f"Dropping connection before HELLO: {e}")
            await channel.wait_closed()
            return

        rejection = None
        if not isinstance(hello, Hello):
            rejection = Error(code="expected-hello", msg=f"First message must be HELLO, got {hello.t}")
        elif hello.proto != PROTO_VERSION:
            rejection = Error(
                code="proto-version",
                msg=f"Protocol version {hello.proto} unsupported, expected {PROTO_VERSION}",
            )
        elif not 0 <= hello.party < self.n_parties or hello.party in self.channels:
            rejection = Error(code="bad-party", msg=f"Party {hello.party} is invalid or taken")
        if rejection is not None:
            self.logger.warning(f"Rejecting connection: {rejection.msg}")
            try:
                await channel.send(rejection)
            except (ConnectionError, OSError):
                pass
            await channel.wait_closed()
            return

        party = hello.party
        channel.name = f"party {party}"
        queue: asyncio.Queue = asyncio.Queue()
        self.channels[party] = channel
        self.queues[party] = queue
        self.logger.info(f"Party {party} connected")
        if len(self.channels) == self.n_parties:
            self._ready.set()

        while True:
            try:
                message = await channel.receive()
            except ProtocolViolation as e:
                e.party = party
                await queue.put(e)
                continue
            except (ConnectionError, OSError):
                message = None
            await queue.put(message)
            if message is None:
                return

    async def _next(self, party: int, timeout: float):
        if party in self.disconnected:
            raise PartyDisconnected(party)
        item = await asyncio.wait_for(self.queues[party].get(), timeout)
        if item is None:
            self.disconnected.add(party)
            raise PartyDisconnected(party)
        if isinstance(item, ProtocolViolation):
            raise item
        return item

    async def _send(self, party: int, message) -> None:
        try:
            await self.channels[party].send(message)
        except (ConnectionError, OSError) as e:
            self.disconnected.add(party)
            raise PartyDisconnected(party) from e

    # --- run ---

    async def run(self) -> SessionReport:
        """
        Wait for every party, play all rounds and send END.

        Returns:
            SessionReport: Round records and summary statistics
        """
        if self.server is None:
            await self.start()
        await self._ready.wait()
        self.logger.info(f"All {self.n_parties} parties connected, playing {self.n_rounds} rounds")

        try:
            for round_id in range(self.n_rounds):
                record = await self.play_round(round_id)
                self.report.rounds.append(record)
                if self.late_policy == "abort" and ("late" in record.flags or "missing" in record.flags):
                    raise LateOutputAbort(f"Round {round_id} has a late or missing output")
        except LateOutputAbort as e:
            self.report.aborted = True
            self.logger.error(f"Run aborted: {e}")
        finally:
            self._summarize()
            await self._finish()
        return self.report

    def _summarize(self) -> None:
        report = self.report
        report.mean, report.std_err = mean_and_std_err([r.utility for r in report.rounds])
        report.late = sum(1 for r in report.rounds if "late" in r.flags)
        report.missing = sum(1 for r in report.rounds if "missing" in r.flags)
        report.dropped_peers = sum(
            1 for r in report.rounds for event in r.peer_events if not event.delivered
        )
        self.logger.info(
            f"Played {report.n_rounds} rounds: mean utility {report.mean:.6f} "
            f"(std err {report.std_err:.2e}), {report.late} late, {report.missing} missing, "
            f"{report.dropped_peers} dropped peer message(s)"
        )

    async def _finish(self) -> None:
        end = End(mean=self.report.mean, std_err=self.report.std_err)
        for party, channel in sorted(self.channels.items()):
            if party not in self.disconnected:
                try:
                    await channel.send(end)
                except (ConnectionError, OSError):
                    pass
            await channel.wait_closed()
        if self.server is not None:
            self.server.close()
            await self.server.wait_closed()

    async def play_round(self, round_id: int) -> RoundRecord:
        """
        Play one round and score it.

        Args:
            round_id: Round number

        Returns:
            RoundRecord: Inputs, outputs, timestamps, relayed messages and utility
        """
        joint_input = int(self.rng.choice(self.game.n_joint_inputs, p=self.game.pi))
        indices = unflatten(joint_input, self.game.input_sizes)
        record = RoundRecord(
            round_id=round_id,
            inputs=[self.game.inputs[j][i] for j, i in enumerate(indices)],
            outputs=[None] * self.n_parties,
            input_times=[0.0] * self.n_parties,
            output_times=[None] * self.n_parties,
        )
        if self.session is not None:
            self.session.open_round(round_id)
        try:
            if self.clock == "logical":
                await self._logical_round(record)
            else:
                await self._wall_round(record)
        except ProtocolViolation as e:
            self.report.protocol_errors += 1
            record.flag("protocol")
            self.logger.warning(f"Round {round_id} aborted: {e}")
            if e.party is not None and e.party not in self.disconnected:
                await self._send(e.party, Error(code=e.code, msg=str(e)))
        finally:
            if self.session is not None:
                self.session.close_round(round_id)

        self._score(record)
        result = Result(round=round_id, utility=record.utility)
        for party in range(self.n_parties):
            await self._send(party, result)
        return record

    def _score(self, record: RoundRecord) -> None:
        missing = [j for j, output in enumerate(record.outputs) if output is None]
        late = [
            j
            for j, at in enumerate(record.output_times)
            if at is not None and at > self.deadline
        ]
        if missing:
            record.flag("missing")
        if late:
            record.flag("late")
        if missing or "protocol" in record.flags or (late and self.late_policy == "zero"):
            record.utility = 0.0
            return
        joint_output = flatten(
            [self.game.output_index(j, label) for j, label in enumerate(record.outputs)],
            self.game.output_sizes,
        )
        record.utility = float(
            self.game.utility[joint_input_index(self.game, record.inputs), joint_output]
        )

    # --- message handling shared by both clocks ---

    async def _stray(self, party: int, message, record: RoundRecord) -> None:
        """A message tagged with another round."""
        if message.round < record.round_id:
            self.report.stale_messages += 1
            self.logger.debug(
                f"Dropping {message.t} from party {party} for finished round {message.round}"
            )
            return
        self.report.protocol_errors += 1
        record.flag("protocol")
        self.logger.warning(f"Party {party} sent {message.t} for unknown round {message.round}")
        await self._send(
            party, Error(code="unknown-round", msg=f"Round {message.round} is not open")
        )

    def _commit(self, record: RoundRecord, party: int, message: Output, at: float) -> None:
        if record.outputs[party] is not None:
            raise ProtocolViolation(
                f"Party {party} sent a second OUTPUT in round {record.round_id}",
                code="duplicate-output",
                party=party,
            )
        if message.output not in self.game.outputs[party]:
            raise ProtocolViolation(
                f"Party {party} output '{message.output}' is not an output label",
                code="bad-output",
                party=party,
            )
        record.outputs[party] = message.output
        record.output_times[party] = at

    async def _answer_query(self, record: RoundRecord, party: int, message: EQuery) -> None:
        if self.session is None:
            raise ProtocolViolation(
                "EQUERY sent to a classical referee", code="no-session", party=party
            )
        if message.input != record.inputs[party]:
            raise ProtocolViolation(
                f"Party {party} queried with input '{message.input}' but received "
                f"'{record.inputs[party]}'",
                code="bad-query",
                party=party,
            )
        try:
            output = entanglement_query(self.session, record.round_id, party, message.input)
        except DuplicateQuery as e:
            raise ProtocolViolation(str(e), code="duplicate-query", party=party) from e
        await self._send(party, EAnswer(round=record.round_id, output=output))

    def _peer_event(self, record: RoundRecord, party: int, message: Peer, at: float) -> PeerEvent:
        target = message.to
        if not 0 <= target < self.n_parties or target == party:
            raise ProtocolViolation(
                f"Party {party} sent PEER to invalid party {target}", code="bad-peer", party=party
            )
        deliver_at = at + float(self.latencies[party, target])
        event = PeerEvent(party, target, at, deliver_at, delivered=deliver_at <= self.deadline)
        record.peer_events.append(event)
        if not event.delivered:
            record.flag("dropped-peer")
        return event

    # --- logical clock ---

    async def _logical_round(self, record: RoundRecord) -> None:
        round_id = record.round_id
        events: List[tuple] = []
        sequence = itertools.count()
        for party in range(self.n_parties):
            message = Input(round=round_id, input=record.inputs[party], deadline_s=self.deadline)
            heapq.heappush(events, (0.0, next(sequence), party, message, None))

        last_event = [0.0] * self.n_parties
        # Parties that missed a reaction get no more events this round; their late
        # reply is dropped as stale once the next round opens
        timed_out: Set[int] = set()
        while events:
            at, _, party, message, peer_event = heapq.heappop(events)
            if record.outputs[party] is not None or party in timed_out:
                # Committed or timed-out parties get no further events
                if peer_event is not None:
                    peer_event.delivered = False
                continue
            if at < last_event[party]:
                raise RuntimeError(f"Event for party {party} out of order at t={at}")
            last_event[party] = at
            await self._send(party, message)
            reacted = await self._logical_reaction(
                record, party, at, isinstance(message, Input), events, sequence
            )
            if not reacted:
                timed_out.add(party)

        for party in range(self.n_parties):
            if record.outputs[party] is None and party not in timed_out:
                await self._send(party, Deadline(round=round_id, at_s=self.deadline))
                await self._logical_reaction(record, party, self.deadline, False, events, sequence)

    async def _logical_reaction(
        self,
        record: RoundRecord,
        party: int,
        at: float,
        allow_peer: bool,
        events: List[tuple],
        sequence,
    ) -> bool:
        """
        Read PEER/EQUERY messages up to the party's OUTPUT or WAIT.

        Returns:
            bool: False if the party did not finish reacting in time
        """
        while True:
            try:
                message = await self._next(party, self.response_timeout)
            except asyncio.TimeoutError:
                self.logger.warning(
                    f"Party {party} did not react within {self.response_timeout:g}s "
                    f"in round {record.round_id}"
                )
                record.flag("timeout")
                return False
            if not hasattr(message, "round"):
                raise ProtocolViolation(
                    f"Unexpected {message.t} from party {party}", party=party
                )
            if message.round != record.round_id:
                await self._stray(party, message, record)
                continue
            if isinstance(message, Peer):
                if not allow_peer:
                    raise ProtocolViolation(
                        f"Party {party} sent PEER outside its reaction to INPUT",
                        code="relay-not-allowed",
                        party=party,
                    )
                event = self._peer_event(record, party, message, at)
                if event.delivered:
                    deliver = PeerDeliver(
                        round=record.round_id,
                        source=party,
                        payload=message.payload,
                        at_s=event.deliver_at,
                    )
                    heapq.heappush(
                        events, (event.deliver_at, next(sequence), event.target, deliver, event)
                    )
            elif isinstance(message, EQuery):
                await self._answer_query(record, party, message)
            elif isinstance(message, Output):
                self._commit(record, party, message, at)
                return True
            elif isinstance(message, Wait):
                return True
            else:
                raise ProtocolViolation(
                    f"Unexpected {message.t} from party {party}", party=party
                )

    # --- wall clock ---

    async def _wall_round(self, record: RoundRecord) -> None:
        loop = asyncio.get_running_loop()
        start = loop.time()
        timers: List[asyncio.TimerHandle] = []
        pending: Set[asyncio.Future] = set()

        def now() -> float:
            return loop.time() - start

        def spawn(coroutine_function, *args) -> None:
            pending.add(asyncio.ensure_future(coroutine_function(*args)))

        async def deliver(event: PeerEvent, payload: str) -> None:
            if record.outputs[event.target] is not None or now() > self.deadline:
                event.delivered = False
                record.flag("dropped-peer")
                return
            await self._send(
                event.target,
                PeerDeliver(
                    round=record.round_id,
                    source=event.source,
                    payload=payload,
                    at_s=now(),
                ),
            )

        async def deadline_reached() -> None:
            for party in range(self.n_parties):
                if record.outputs[party] is None:
                    await self._send(party, Deadline(round=record.round_id, at_s=now()))

        async def serve_party(party: int) -> None:
            await self._send(
                party,
                Input(round=record.round_id, input=record.inputs[party], deadline_s=self.deadline),
            )
            limit = self.deadline + self.response_timeout
            while record.outputs[party] is None:
                remaining = limit - now()
                if remaining <= 0:
                    record.flag("timeout")
                    return
                try:
                    message = await self._next(party, remaining)
                except asyncio.TimeoutError:
                    record.flag("timeout")
                    return
                if not hasattr(message, "round"):
                    raise ProtocolViolation(
                        f"Unexpected {message.t} from party {party}", party=party
                    )
                if message.round != record.round_id:
                    await self._stray(party, message, record)
                    continue
                at = now()
                if isinstance(message, Peer):
                    event = self._peer_event(record, party, message, at)
                    if event.delivered:
                        timers.append(
                            loop.call_later(
                                event.deliver_at - at, spawn, deliver, event, message.payload
                            )
                        )
                elif isinstance(message, EQuery):
                    await self._answer_query(record, party, message)
                elif isinstance(message, Output):
                    self._commit(record, party, message, at)
                elif not isinstance(message, Wait):
                    raise ProtocolViolation(
                        f"Unexpected {message.t} from party {party}", party=party
                    )

        timers.append(loop.call_later(self.deadline, partial(spawn, deadline_reached)))
        tasks = [asyncio.ensure_future(serve_party(party)) for party in range(self.n_parties)]
        try:
            await asyncio.gather(*tasks)
        finally:
            for task in tasks:
                task.cancel()
            for timer in timers:
                timer.cancel()
            if pending:
                await asyncio.gather(*pending, return_exceptions=True)


async def referee_serve(
    game: ValidatedGame,
    scenario: LatencyScenario,
    mode: Mode = "classical",
    n_rounds: int = 1000,
    seed: int = 0,
    policy: LatePolicy = "zero",
    behavior: Optional[Behavior] = None,
    clock: Clock = "logical",
    listen: str = "127.0.0.1:7643",
    response_timeout: float = 10.0,
) -> SessionReport:
    """
    Run a referee until all rounds are played.

    Args:
        game: Game to referee
        scenario: Latencies and output deadline
        mode: "classical" or "entangled"
        n_rounds: Rounds to play
        seed: Seed for inputs and entangled outcomes
        policy: Late-output policy
        behavior: Shared behavior for entangled mode
        clock: "logical" or "wall"
        listen: host:port to listen on
        response_timeout: Seconds to wait for each party reaction

    Returns:
        SessionReport: Report of the run
    """
    referee = Referee(
        game,
        scenario,
        mode=mode,
        behavior=behavior,
        n_rounds=n_rounds,
        seed=seed,
        late_policy=policy,
        clock=clock,
        listen=listen,
        response_timeout=response_timeout,
    )
    await referee.start()
    return await referee.run()
