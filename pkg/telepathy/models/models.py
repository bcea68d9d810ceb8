"""
Data models for Telepathy.

Tables are numpy arrays made read-only on construction, so instances can be shared
between threads without copying.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Tuple

import numpy as np

from telepathy.game.indexing import unflatten
from telepathy.models.errors import (
    NegativeProbability,
    NonNormalizedDistribution,
    ShapeMismatch,
)

# Row-sum tolerance for derived behaviors
BEHAVIOR_TOL = 1e-9


def _frozen(array: np.ndarray, dtype) -> np.ndarray:
    frozen = np.array(array, dtype=dtype, copy=True)
    frozen.setflags(write=False)
    return frozen


@dataclass(frozen=True, eq=False)
class ValidatedGame:
    """
    A finite multiparty game whose invariants have been checked.

    `pi` is indexed by joint input and `utility` by (joint input, joint output), both in
    JointIndex order (party 0 most significant).
    """

    inputs: Tuple[Tuple[str, ...], ...]
    outputs: Tuple[Tuple[str, ...], ...]
    pi: np.ndarray
    utility: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pi", _frozen(self.pi, np.float64))
        object.__setattr__(self, "utility", _frozen(self.utility, np.float64))

    @property
    def n_parties(self) -> int:
        return len(self.inputs)

    @property
    def input_sizes(self) -> Tuple[int, ...]:
        return tuple(len(labels) for labels in self.inputs)

    @property
    def output_sizes(self) -> Tuple[int, ...]:
        return tuple(len(labels) for labels in self.outputs)

    @property
    def n_joint_inputs(self) -> int:
        return math.prod(self.input_sizes)

    @property
    def n_joint_outputs(self) -> int:
        return math.prod(self.output_sizes)

    def input_index(self, party: int, label: str) -> int:
        return self.inputs[party].index(label)

    def output_index(self, party: int, label: str) -> int:
        return self.outputs[party].index(label)


@dataclass(frozen=True, eq=False)
class Behavior:
    """
    Conditional distribution p(o|i) as a dense (joint input) x (joint output) table.
    """

    input_sizes: Tuple[int, ...]
    output_sizes: Tuple[int, ...]
    table: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "input_sizes", tuple(int(s) for s in self.input_sizes))
        object.__setattr__(self, "output_sizes", tuple(int(s) for s in self.output_sizes))
        table = _frozen(self.table, np.float64)
        expected = (math.prod(self.input_sizes), math.prod(self.output_sizes))
        if table.shape != expected:
            raise ShapeMismatch(f"Behavior table has shape {table.shape}, expected {expected}")
        if np.any(table < 0):
            raise NegativeProbability(f"Behavior has a negative entry ({table.min():.3e})")
        drift = np.abs(table.sum(axis=1) - 1.0)
        if np.any(drift > BEHAVIOR_TOL):
            row = int(np.argmax(drift))
            raise NonNormalizedDistribution(
                f"Behavior row for joint input {row} sums to {table[row].sum():.12f}"
            )
        object.__setattr__(self, "table", table)

    @property
    def n_parties(self) -> int:
        return len(self.input_sizes)

    def same_shape(self, other: "Behavior") -> bool:
        return (
            self.input_sizes == other.input_sizes and self.output_sizes == other.output_sizes
        )


@dataclass(frozen=True)
class DeterministicStrategy:
    """
    Per-party output functions f_j: I_j -> O_j, as output indices per input index.
    """

    tables: Tuple[Tuple[int, ...], ...]

    def to_labels(self, game: ValidatedGame) -> Dict[str, Dict[str, str]]:
        """
        Serialize as party -> {input label: output label}.

        Args:
            game: Game providing the labels

        Returns:
            Dict[str, Dict[str, str]]: Witness mapping
        """
        return {
            str(party): {
                game.inputs[party][i]: game.outputs[party][o] for i, o in enumerate(table)
            }
            for party, table in enumerate(self.tables)
        }


@dataclass(frozen=True)
class LCDeterministicStrategy:
    """
    Per-party output functions of the inputs in the party's view (its in-neighborhood,
    itself included, in party order). Tables are indexed by the JointIndex of the
    viewed inputs.
    """

    views: Tuple[Tuple[int, ...], ...]
    tables: Tuple[Tuple[int, ...], ...]

    def to_labels(self, game: ValidatedGame) -> Dict[str, Dict[str, str]]:
        """
        Serialize as party -> {comma-joined viewed input labels: output label}.
        """
        witness = {}
        for party, (view, table) in enumerate(zip(self.views, self.tables)):
            sizes = [len(game.inputs[k]) for k in view]
            entries = {}
            for key, out in enumerate(table):
                local = unflatten(key, sizes)
                label = ",".join(game.inputs[k][i] for k, i in zip(view, local))
                entries[label] = game.outputs[party][out]
            witness[str(party)] = entries
        return witness


@dataclass(frozen=True)
class CommGraph:
    """
    Directed communication graph: edge (k, j) means party k's input reaches party j
    before the output deadline. Self-loops are never stored.
    """

    n_parties: int
    edges: FrozenSet[Tuple[int, int]] = frozenset()

    def __post_init__(self):
        cleaned = frozenset((int(k), int(j)) for k, j in self.edges if k != j)
        for k, j in cleaned:
            if not (0 <= k < self.n_parties and 0 <= j < self.n_parties):
                raise ShapeMismatch(f"Edge ({k}, {j}) outside parties 0..{self.n_parties - 1}")
        object.__setattr__(self, "edges", cleaned)

    @classmethod
    def empty(cls, n_parties: int) -> "CommGraph":
        return cls(n_parties)

    @classmethod
    def complete(cls, n_parties: int) -> "CommGraph":
        return cls(
            n_parties,
            frozenset((k, j) for k in range(n_parties) for j in range(n_parties) if k != j),
        )

    def with_edge(self, source: int, target: int) -> "CommGraph":
        return CommGraph(self.n_parties, self.edges | {(source, target)})

    def in_neighborhood(self, party: int) -> Tuple[int, ...]:
        """Parties whose inputs reach `party`, itself included, in party order."""
        return tuple(sorted({party} | {k for k, j in self.edges if j == party}))

    def is_subgraph_of(self, other: "CommGraph") -> bool:
        return self.n_parties == other.n_parties and self.edges <= other.edges

    def is_empty(self) -> bool:
        return not self.edges

    def is_complete(self) -> bool:
        return len(self.edges) == self.n_parties * (self.n_parties - 1)

    def to_dict(self) -> dict:
        return {"parties": self.n_parties, "edges": sorted([list(e) for e in self.edges])}


@dataclass(frozen=True, eq=False)
class QuantumStrategy:
    """
    A pure shared state and projective measurements.

    `measurements[j]` has shape (|I_j|, |O_j|, d_j, d_j): one projector per input and
    output of party j.
    """

    dims: Tuple[int, ...]
    state: np.ndarray
    measurements: Tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "state", _frozen(self.state, np.complex128).reshape(-1))
        object.__setattr__(
            self, "measurements", tuple(_frozen(m, np.complex128) for m in self.measurements)
        )

    @property
    def total_dimension(self) -> int:
        return math.prod(self.dims)


@dataclass(frozen=True)
class NoSignalingReport:
    passed: bool
    max_violation: float


@dataclass
class PeerEvent:
    """A PEER message relayed (or dropped) by the referee."""

    source: int
    target: int
    sent_at: float
    deliver_at: float
    delivered: bool

    def to_dict(self) -> dict:
        return {
            "from": self.source,
            "to": self.target,
            "sent_s": self.sent_at,
            "deliver_s": self.deliver_at,
            "delivered": self.delivered,
        }


@dataclass
class RoundRecord:
    """
    Outcome of one refereed round. `outputs[j]` is None when party j's output is
    missing; the utility is then 0.
    """

    round_id: int
    inputs: List[str]
    outputs: List[Optional[str]]
    input_times: List[float]
    output_times: List[Optional[float]]
    utility: float = 0.0
    peer_events: List[PeerEvent] = field(default_factory=list)
    flags: List[str] = field(default_factory=list)

    def flag(self, name: str) -> None:
        if name not in self.flags:
            self.flags.append(name)

    def to_dict(self) -> dict:
        return {
            "round_id": self.round_id,
            "inputs": list(self.inputs),
            "outputs": list(self.outputs),
            "input_s": list(self.input_times),
            "output_s": list(self.output_times),
            "utility": self.utility,
            "peer_events": [event.to_dict() for event in self.peer_events],
            "flags": list(self.flags),
        }
