import pytest
from pydantic import ValidationError

from telepathy.latency.model import (
    FIBER_MEDIUM_FACTOR,
    SPEED_OF_LIGHT_M_S,
    LatencyScenario,
    comm_graph,
    comm_graph_from_dict,
    datacenter_scenario,
    dump_comm_graph,
    dump_scenario,
    exchange_pair_scenario,
    latency_matrix,
    light_delay,
    line_scenario,
    load_comm_graph,
    load_scenario,
    max_separation,
)
from telepathy.models.errors import InvalidScenario, NegativeDistance, SpecInvalid
from telepathy.models.models import CommGraph


def test_exchange_distance_light_delay():
    delay = light_delay(56_300.0, 1.0)
    assert 187.7e-6 <= delay <= 188.0e-6


def test_fiber_is_slower():
    assert light_delay(1000.0, FIBER_MEDIUM_FACTOR) > light_delay(1000.0)


def test_max_separation_inverts_light_delay():
    assert max_separation(light_delay(1234.0, 1.5), 1.5) == pytest.approx(1234.0)
    assert max_separation(1.0) == SPEED_OF_LIGHT_M_S


def test_bad_geometry():
    with pytest.raises(NegativeDistance):
        light_delay(-1.0)
    with pytest.raises(InvalidScenario):
        light_delay(1.0, 0.5)


def test_exchange_pair_graphs():
    assert comm_graph(exchange_pair_scenario(deadline_s=1e-6)).is_empty()
    assert comm_graph(exchange_pair_scenario(deadline_s=200e-6)).is_complete()


def test_deadline_boundary_is_inclusive():
    scenario = LatencyScenario(latencies_s=[[0, 1e-3], [1e-3, 0]], deadline_s=1e-3)
    assert comm_graph(scenario).is_complete()


def test_partial_window_on_a_line():
    # Gaps of 1 km and 10 km; the deadline only covers the short gap
    scenario = line_scenario([1000.0, 10_000.0], deadline_s=light_delay(2000.0))
    assert comm_graph(scenario).edges == {(0, 1), (1, 0)}


def test_directed_latencies():
    scenario = LatencyScenario(
        latencies_s=[[0, 1e-6], [1e-3, 0]], deadline_s=1e-5, directed=True
    )
    assert comm_graph(scenario).edges == {(0, 1)}


@pytest.mark.parametrize(
    "latencies",
    [
        [[0, 1e-6], [1e-3, 0]],
        [[0, -1], [-1, 0]],
        [[1, 0], [0, 0]],
        [[0, 1], [1, 0], [0, 0]],
    ],
)
def test_invalid_latency_matrices(latencies):
    with pytest.raises(InvalidScenario):
        latency_matrix(LatencyScenario(latencies_s=latencies, deadline_s=1.0))


def test_exactly_one_source_of_latencies():
    with pytest.raises(InvalidScenario):
        latency_matrix(LatencyScenario(deadline_s=1.0))
    with pytest.raises(InvalidScenario):
        latency_matrix(
            LatencyScenario(latencies_s=[[0]], positions_m=[[0.0]], deadline_s=1.0)
        )


def test_deadline_must_be_positive():
    with pytest.raises(ValidationError):
        LatencyScenario(latencies_s=[[0]], deadline_s=0)


def test_datacenter_scenario():
    scenario = datacenter_scenario(4, spacing_m=100.0, deadline_s=light_delay(150.0, FIBER_MEDIUM_FACTOR))
    graph = comm_graph(scenario)
    assert scenario.n_parties == 4
    assert graph.in_neighborhood(1) == (0, 1, 2)
    assert graph.in_neighborhood(3) == (2, 3)


def test_comm_graph_helpers():
    graph = CommGraph.empty(3).with_edge(0, 2)
    assert graph.in_neighborhood(2) == (0, 2)
    assert graph.is_subgraph_of(CommGraph.complete(3))
    assert not CommGraph.complete(3).is_subgraph_of(graph)


def test_files(tmp_path):
    scenario = exchange_pair_scenario(deadline_s=200e-6)
    dump_scenario(scenario, tmp_path / "scenario.json")
    assert comm_graph(load_scenario(tmp_path / "scenario.json")).is_complete()

    graph = CommGraph.empty(3).with_edge(1, 0)
    dump_comm_graph(graph, tmp_path / "graph.json")
    assert load_comm_graph(tmp_path / "graph.json") == graph


def test_malformed_comm_graph():
    with pytest.raises(SpecInvalid):
        comm_graph_from_dict({"edges": [[0, 1]]})
    with pytest.raises(SpecInvalid):
        comm_graph_from_dict({"parties": 0})
