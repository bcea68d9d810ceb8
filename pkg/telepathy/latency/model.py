"""
Latency model for Telepathy.

Turns physical geometry into one-way latencies and latencies into the communication
graph of a round: party k's input reaches party j in time iff the k -> j latency is at
most the output deadline.
"""

import json
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from telepathy.models.errors import InvalidScenario, NegativeDistance, SpecInvalid
from telepathy.models.models import CommGraph

logger = logging.getLogger("telepathy.latency.model")

SPEED_OF_LIGHT_M_S = 299_792_458.0
# Group index of standard single-mode optical fibre
FIBER_MEDIUM_FACTOR = 1.468
VACUUM = 1.0


class LatencyScenario(BaseModel):
    """
    Scenario file. Give either `latencies_s` (n x n, seconds) or `positions_m` (one
    coordinate list per party) with a `medium_factor`.
    """

    model_config = ConfigDict(extra="forbid")

    latencies_s: Optional[List[List[float]]] = None
    positions_m: Optional[List[List[float]]] = None
    medium_factor: float = VACUUM
    deadline_s: float = Field(gt=0)
    directed: bool = False

    @property
    def n_parties(self) -> int:
        return len(latency_matrix(self))


def light_delay(distance: float, medium_factor: float = VACUUM) -> float:
    """
    One-way light delay in seconds.

    Args:
        distance: Meters
        medium_factor: Refractive (group) index of the medium, 1 for vacuum

    Returns:
        float: distance * medium_factor / c
    """
    if distance < 0:
        raise NegativeDistance(f"Distance must be non-negative, got {distance}")
    if not medium_factor >= 1:
        raise InvalidScenario(f"Medium factor must be >= 1, got {medium_factor}")
    return distance * medium_factor / SPEED_OF_LIGHT_M_S


def max_separation(deadline: float, medium_factor: float = VACUUM) -> float:
    """Largest distance in meters a signal covers within `deadline` seconds."""
    if deadline < 0:
        raise InvalidScenario(f"Deadline must be non-negative, got {deadline}")
    if not medium_factor >= 1:
        raise InvalidScenario(f"Medium factor must be >= 1, got {medium_factor}")
    return deadline * SPEED_OF_LIGHT_M_S / medium_factor


def latency_matrix(scenario: LatencyScenario) -> np.ndarray:
    """
    Validated one-way latency matrix of a scenario.

    Args:
        scenario: Scenario

    Returns:
        np.ndarray: (n, n) latencies in seconds, zero diagonal
    """
    if (scenario.latencies_s is None) == (scenario.positions_m is None):
        raise InvalidScenario("Give exactly one of 'latencies_s' and 'positions_m'")

    if scenario.positions_m is not None:
        positions = np.asarray(scenario.positions_m, dtype=np.float64)
        if positions.ndim != 2 or len(positions) == 0:
            raise InvalidScenario("'positions_m' must be a non-empty list of coordinate lists")
        if not np.all(np.isfinite(positions)):
            raise InvalidScenario("'positions_m' has non-finite coordinates")
        distances = np.linalg.norm(positions[:, None, :] - positions[None, :, :], axis=-1)
        return np.vectorize(lambda d: light_delay(d, scenario.medium_factor))(distances)

    latencies = np.asarray(scenario.latencies_s, dtype=np.float64)
    n = len(latencies)
    if n == 0 or latencies.shape != (n, n):
        raise InvalidScenario(f"'latencies_s' must be a square matrix, got shape {latencies.shape}")
    if not np.all(np.isfinite(latencies)):
        raise InvalidScenario("'latencies_s' has non-finite entries")
    if np.any(latencies < 0):
        raise InvalidScenario("'latencies_s' has negative entries")
    if np.any(np.diag(latencies) != 0):
        raise InvalidScenario("'latencies_s' must have a zero diagonal")
    if not scenario.directed and not np.array_equal(latencies, latencies.T):
        raise InvalidScenario("'latencies_s' is not symmetric; set 'directed' for one-way links")
    return latencies


def comm_graph(scenario: LatencyScenario) -> CommGraph:
    """
    Communication graph of a scenario: edge k -> j iff latency[k][j] <= deadline.

    Args:
        scenario: Scenario

    Returns:
        CommGraph: Pairs that can communicate before outputs are due
    """
    latencies = latency_matrix(scenario)
    n = len(latencies)
    edges = frozenset(
        (k, j)
        for k in range(n)
        for j in range(n)
        if k != j and latencies[k, j] <= scenario.deadline_s
    )
    logger.debug(
        f"Scenario with {n} parties and deadline {scenario.deadline_s:g}s: "
        f"{len(edges)} communication edge(s)"
    )
    return CommGraph(n, edges)


# --- presets ---


def exchange_pair_scenario(
    deadline_s: float = 1e-6, distance_m: float = 56_300.0
) -> LatencyScenario:
    """Two trading servers at neighbouring exchanges, line of sight in vacuum."""
    return LatencyScenario(
        positions_m=[[0.0, 0.0], [distance_m, 0.0]], medium_factor=VACUUM, deadline_s=deadline_s
    )


def datacenter_scenario(
    n: int, spacing_m: float, deadline_s: float, medium_factor: float = FIBER_MEDIUM_FACTOR
) -> LatencyScenario:
    """`n` servers on a line, `spacing_m` apart, linked by fibre."""
    if n < 1:
        raise InvalidScenario(f"A scenario needs at least one party, got {n}")
    return LatencyScenario(
        positions_m=[[k * spacing_m, 0.0] for k in range(n)],
        medium_factor=medium_factor,
        deadline_s=deadline_s,
    )


def line_scenario(
    distances: Sequence[float], deadline_s: float, medium_factor: float = VACUUM
) -> LatencyScenario:
    """
    Parties on a line with consecutive gaps `distances`. With gaps (d, d') and a
    deadline in [d/c, d'/c) only the left pair can communicate.
    """
    if any(d < 0 for d in distances):
        raise NegativeDistance(f"Distances must be non-negative, got {list(distances)}")
    positions = [0.0]
    for gap in distances:
        positions.append(positions[-1] + gap)
    return LatencyScenario(
        positions_m=[[x] for x in positions], medium_factor=medium_factor, deadline_s=deadline_s
    )


# --- files ---


def load_scenario(path: Union[str, Path]) -> LatencyScenario:
    scenario = LatencyScenario.model_validate(json.loads(Path(path).read_text()))
    latency_matrix(scenario)
    return scenario


def dump_scenario(scenario: LatencyScenario, path: Union[str, Path]) -> None:
    Path(path).write_text(scenario.model_dump_json(exclude_none=True) + "\n")


def comm_graph_from_dict(data: dict) -> CommGraph:
    """Parse `{"parties": n, "edges": [[from, to], ...]}` with 0-based parties."""
    try:
        n = int(data["parties"])
        edges = [(int(k), int(j)) for k, j in data.get("edges", [])]
    except (KeyError, TypeError, ValueError) as e:
        raise SpecInvalid(f"Malformed communication graph: {e}") from e
    if n < 1:
        raise SpecInvalid(f"Communication graph needs at least one party, got {n}")
    return CommGraph(n, frozenset(edges))


def load_comm_graph(path: Union[str, Path]) -> CommGraph:
    return comm_graph_from_dict(json.loads(Path(path).read_text()))


def dump_comm_graph(comm: CommGraph, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(comm.to_dict()) + "\n")
