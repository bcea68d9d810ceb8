import math

import numpy as np
import pytest

from telepathy.catalog.games import magic_square
from telepathy.game.core import average_utility
from telepathy.models.errors import DimensionCap, ShapeMismatch
from telepathy.quantum.seesaw import (
    MONOTONE_SLACK,
    SeesawConfig,
    improve_measurement,
    live_outputs,
    random_projective_measurement,
    restart_seed,
    seesaw_optimize,
)
from telepathy.quantum.strategy import behavior_from_quantum, validate_qstrategy
from telepathy.solver.classical import classical_value

TSIRELSON = (2 + math.sqrt(2)) / 4


def test_chsh_reaches_tsirelson(chsh_game):
    result = seesaw_optimize(chsh_game, (2, 2), SeesawConfig(restarts=5, max_iters=200))
    assert result.q_lower >= TSIRELSON - 1e-4
    assert result.q_lower <= TSIRELSON + 1e-9
    assert validate_qstrategy(result.strategy).passed
    behavior = behavior_from_quantum(chsh_game, result.strategy)
    assert average_utility(chsh_game, behavior) == pytest.approx(result.q_lower, abs=1e-8)


def test_trace_is_monotone(chsh_game):
    result = seesaw_optimize(chsh_game, (2, 2), SeesawConfig(restarts=1, max_iters=50, seed=3))
    steps = np.diff(result.trace)
    assert np.all(steps >= -MONOTONE_SLACK)


def test_same_seed_same_result(chsh_game):
    cfg = SeesawConfig(restarts=2, max_iters=30, seed=11)
    first = seesaw_optimize(chsh_game, (2, 2), cfg)
    second = seesaw_optimize(chsh_game, (2, 2), cfg)
    assert first.q_lower == second.q_lower
    assert first.trace == second.trace
    assert np.array_equal(first.strategy.state, second.strategy.state)


def test_parallel_restarts_match_serial(chsh_game):
    serial = seesaw_optimize(chsh_game, (2, 2), SeesawConfig(restarts=3, max_iters=30))
    parallel = seesaw_optimize(chsh_game, (2, 2), SeesawConfig(restarts=3, max_iters=30, workers=3))
    assert parallel.restart_values == serial.restart_values
    assert parallel.best_restart == serial.best_restart


def test_target_stops_restarts(chsh_game):
    result = seesaw_optimize(
        chsh_game, (2, 2), SeesawConfig(restarts=5, max_iters=200, target=0.8)
    )
    assert result.target_reached
    assert len(result.restart_values) <= 5


def test_ghz_reaches_one(ghz_game):
    result = seesaw_optimize(ghz_game, (2, 2, 2), SeesawConfig(restarts=5, max_iters=200))
    assert result.q_lower >= 1 - 1e-6


def test_magic_square_reaches_one():
    game = magic_square()
    result = seesaw_optimize(game, (4, 4), SeesawConfig(restarts=20, max_iters=200, target=0.999))
    assert result.target_reached
    assert len(result.restart_values) <= 20
    behavior = behavior_from_quantum(game, result.strategy)
    assert average_utility(game, behavior) == pytest.approx(result.q_lower, abs=1e-9)


def test_dimension_cap(chsh_game):
    with pytest.raises(DimensionCap) as info:
        seesaw_optimize(chsh_game, (64, 128), SeesawConfig(dimension_cap=4096))
    assert info.value.total_dimension == 8192


def test_dims_must_match_parties(chsh_game):
    with pytest.raises(ShapeMismatch):
        seesaw_optimize(chsh_game, (2, 2, 2))


def test_restart_seeds_are_distinct():
    seeds = {restart_seed(0, r) for r in range(100)}
    assert len(seeds) == 100
    assert restart_seed(5, 0) != restart_seed(6, 0)


def test_random_measurement_is_projective():
    projectors = random_projective_measurement(np.random.default_rng(0), 3, 2)
    assert np.allclose(projectors.sum(axis=0), np.eye(3))
    for p in projectors:
        assert np.allclose(p @ p, p)


def test_magic_square_rank_goes_to_winning_parities():
    game = magic_square()
    for party, parity in ((0, 0), (1, 1)):
        for outputs in live_outputs(game, party):
            labels = [game.outputs[party][o] for o in outputs]
            assert len(labels) == 4
            assert all(label.count("1") % 2 == parity for label in labels)


def test_live_outputs_keep_everything_when_all_score(chsh_game):
    assert [o.tolist() for o in live_outputs(chsh_game, 0)] == [[0, 1], [0, 1]]


@pytest.mark.parametrize("seed", range(10))
def test_measurement_step_never_lowers_value(seed):
    rng = np.random.default_rng(seed)
    dim, n_outputs = 3, 4
    raw = rng.standard_normal((n_outputs, dim, dim)) + 1j * rng.standard_normal((n_outputs, dim, dim))
    effective = np.einsum("oab,ocb->oac", raw, raw.conj())
    projectors = random_projective_measurement(rng, dim, n_outputs)
    improved = improve_measurement(projectors, effective, np.arange(n_outputs))

    def value(p):
        return float(np.einsum("oab,oba->", p, effective).real)

    assert value(improved) >= value(projectors) - MONOTONE_SLACK
    assert np.allclose(improved.sum(axis=0), np.eye(dim))
    for p in improved:
        assert np.allclose(p @ p, p)


@pytest.mark.parametrize("seed", range(20))
def test_one_dimensional_seesaw_is_classical(random_game, seed):
    game = random_game(np.random.default_rng(seed), 2)
    result = seesaw_optimize(game, (1, 1), SeesawConfig(restarts=3, max_iters=20, seed=seed))
    assert result.q_lower <= classical_value(game).c_star + 1e-9
    behavior = behavior_from_quantum(game, result.strategy)
    assert average_utility(game, behavior) == pytest.approx(result.q_lower, abs=1e-9)


def test_random_measurement_uses_only_live_outputs():
    projectors = random_projective_measurement(np.random.default_rng(1), 4, 8, live=[0, 3, 5, 6])
    ranks = [round(float(np.trace(p).real)) for p in projectors]
    assert ranks == [1, 0, 0, 1, 0, 1, 1, 0]
