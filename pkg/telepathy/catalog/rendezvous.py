"""
Rendezvous games.

Each party starts on a vertex of an undirected graph (its input) and commits to a walk
of fixed length (its output). A walk is a sequence of ports: port p at vertex v moves to
the p-th neighbor of v in sorted vertex order, or stays at v when p >= deg(v). Ports run
over 0..max degree, so the output set is the same for every start vertex.
"""

import itertools
import logging
import math
from typing import Dict, List, Literal, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from pydantic import BaseModel, Field

from telepathy.game.core import build_game
from telepathy.game.indexing import flatten
from telepathy.models.errors import OutputSetTooLarge, SpecInvalid
from telepathy.models.models import ValidatedGame

logger = logging.getLogger("telepathy.catalog.rendezvous")

Vertex = Union[int, str]

# Largest dense utility table a rendezvous game may produce
MAX_TABLE_ENTRIES = 10_000_000


class StartWeight(BaseModel):
    starts: List[Vertex]
    p: float = Field(ge=0)


class RendezvousSpec(BaseModel):
    vertices: List[Vertex]
    edges: List[Tuple[Vertex, Vertex]] = Field(default_factory=list)
    horizon: int = Field(ge=1)
    start_distribution: List[StartWeight]
    meet_rule: Literal["final-step", "any-step"] = "final-step"


def _vertex_key(vertex: Vertex) -> Tuple[int, Union[int, str]]:
    return (0, vertex) if isinstance(vertex, int) else (1, vertex)


class WalkGraph:
    """Port semantics over a networkx graph."""

    def __init__(self, spec: RendezvousSpec):
        if len(set(spec.vertices)) != len(spec.vertices):
            raise SpecInvalid("Rendezvous vertices must be unique")
        self.graph = nx.Graph()
        self.graph.add_nodes_from(spec.vertices)
        for u, v in spec.edges:
            if u not in self.graph or v not in self.graph:
                raise SpecInvalid(f"Edge ({u}, {v}) references an unknown vertex")
            if u == v:
                raise SpecInvalid(f"Self-loop at {u} is not allowed in a simple graph")
            self.graph.add_edge(u, v)
        self.order: List[Vertex] = sorted(spec.vertices, key=_vertex_key)
        self.position: Dict[Vertex, int] = {v: k for k, v in enumerate(self.order)}
        self.neighbors: Dict[Vertex, List[Vertex]] = {
            v: sorted(self.graph.neighbors(v), key=_vertex_key) for v in self.order
        }
        self.max_degree = max((d for _, d in self.graph.degree()), default=0)

    @property
    def n_ports(self) -> int:
        return self.max_degree + 1

    def step(self, vertex: Vertex, port: int) -> Vertex:
        neighbors = self.neighbors[vertex]
        return neighbors[port] if port < len(neighbors) else vertex

    def trajectory(self, start: Vertex, ports: Sequence[int]) -> List[Vertex]:
        """Vertices occupied at steps 1..len(ports)."""
        path = []
        current = start
        for port in ports:
            current = self.step(current, port)
            path.append(current)
        return path


def _check_distribution(spec: RendezvousSpec, walk: WalkGraph) -> int:
    if not spec.start_distribution:
        raise SpecInvalid("Start distribution is empty")
    n_parties = len(spec.start_distribution[0].starts)
    if n_parties < 1:
        raise SpecInvalid("Start tuples must name at least one vertex")
    for entry in spec.start_distribution:
        if len(entry.starts) != n_parties:
            raise SpecInvalid("All start tuples must have the same number of parties")
        for vertex in entry.starts:
            if vertex not in walk.position:
                raise SpecInvalid(f"Start vertex {vertex} is not in the graph")
    total = math.fsum(entry.p for entry in spec.start_distribution)
    if abs(total - 1.0) > 1e-12:
        raise SpecInvalid(f"Start distribution sums to {total!r}, expected 1")
    return n_parties


def port_label(ports: Sequence[int]) -> str:
    return "-".join(str(p) for p in ports)


def rendezvous(spec: RendezvousSpec, max_table_entries: int = MAX_TABLE_ENTRIES) -> ValidatedGame:
    """
    Build the rendezvous game of a graph.

    Args:
        spec: Graph, horizon, start distribution and meeting rule
        max_table_entries: Cap on the dense utility table size

    Returns:
        ValidatedGame: Game with start vertices as inputs and port sequences as outputs
    """
    walk = WalkGraph(spec)
    n_parties = _check_distribution(spec, walk)
    support = [entry for entry in spec.start_distribution if entry.p > 0]

    inputs = [
        sorted({entry.starts[j] for entry in support}, key=_vertex_key) for j in range(n_parties)
    ]
    port_sequences = list(itertools.product(range(walk.n_ports), repeat=spec.horizon))
    n_outputs = len(port_sequences)
    table_entries = math.prod(len(s) for s in inputs) * n_outputs**n_parties
    if table_entries > max_table_entries:
        raise OutputSetTooLarge(
            f"Rendezvous game needs {table_entries} utility entries "
            f"({n_outputs} walks per party), cap is {max_table_entries}"
        )

    input_sizes = [len(s) for s in inputs]
    pi = np.zeros(math.prod(input_sizes))
    for entry in support:
        index = flatten([inputs[j].index(v) for j, v in enumerate(entry.starts)], input_sizes)
        pi[index] += entry.p

    # positions[j][start, walk, step] = vertex position after that step
    positions = [
        np.array(
            [
                [[walk.position[v] for v in walk.trajectory(start, ports)] for ports in port_sequences]
                for start in inputs[j]
            ],
            dtype=np.int64,
        )
        for j in range(n_parties)
    ]

    utility = np.zeros((len(pi), n_outputs**n_parties))
    for row, joint_input in enumerate(itertools.product(*[range(s) for s in input_sizes])):
        shape = [1] * n_parties + [spec.horizon]
        first_shape = list(shape)
        first_shape[0] = n_outputs
        reference = positions[0][joint_input[0]].reshape(first_shape)
        together = np.ones([n_outputs] * n_parties + [spec.horizon], dtype=bool)
        for j in range(1, n_parties):
            party_shape = list(shape)
            party_shape[j] = n_outputs
            together &= positions[j][joint_input[j]].reshape(party_shape) == reference
        if spec.meet_rule == "final-step":
            met = together[..., -1]
        else:
            met = together.any(axis=-1)
        utility[row] = met.reshape(-1).astype(np.float64)

    logger.debug(
        f"Rendezvous game on {len(walk.order)} vertices: {n_parties} parties, horizon "
        f"{spec.horizon}, {n_outputs} walks per party, rule {spec.meet_rule}"
    )
    return build_game(
        [[str(v) for v in starts] for starts in inputs],
        [[port_label(p) for p in port_sequences] for _ in range(n_parties)],
        pi,
        utility,
    )


def corner_square_spec(
    horizon: int = 1, meet_rule: Literal["final-step", "any-step"] = "final-step"
) -> RendezvousSpec:
    """
    Five vertices: a square 1, 2, 3, 4 with a center 5 and edges 1-2, 1-5, 1-4, 4-5,
    2-3. Party 0 starts at corner 1, party 1 at the opposite corner 3.
    """
    return RendezvousSpec(
        vertices=[1, 2, 3, 4, 5],
        edges=[(1, 2), (1, 5), (1, 4), (4, 5), (2, 3)],
        horizon=horizon,
        start_distribution=[StartWeight(starts=[1, 3], p=1.0)],
        meet_rule=meet_rule,
    )
