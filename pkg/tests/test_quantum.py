import json
import math

import numpy as np
import pytest

from telepathy.catalog.games import chsh
from telepathy.game.core import average_utility, no_signaling_check
from telepathy.models.errors import (
    IncompleteMeasurement,
    InvalidState,
    NonProjective,
    ShapeMismatch,
)
from telepathy.models.models import QuantumStrategy
from telepathy.quantum.strategy import (
    behavior_from_quantum,
    bell_violation,
    chsh_optimal_strategy,
    dump_strategy,
    ghz_optimal_strategy,
    load_strategy,
    strategy_from_dict,
    strategy_to_dict,
    maximally_entangled_pair,
    validate_qstrategy,
)

TSIRELSON = (2 + math.sqrt(2)) / 4


def test_chsh_optimal_strategy(chsh_game):
    strategy = chsh_optimal_strategy()
    assert validate_qstrategy(strategy).passed
    behavior = behavior_from_quantum(chsh_game, strategy)
    assert average_utility(chsh_game, behavior) == pytest.approx(TSIRELSON, abs=1e-12)
    assert no_signaling_check(behavior).passed


def test_ghz_optimal_strategy(ghz_game):
    behavior = behavior_from_quantum(ghz_game, ghz_optimal_strategy())
    assert average_utility(ghz_game, behavior) == pytest.approx(1.0, abs=1e-12)
    assert no_signaling_check(behavior).passed


def test_product_state_is_classical(chsh_game):
    strategy = chsh_optimal_strategy()
    product = QuantumStrategy((2, 2), np.array([1, 0, 0, 0]), strategy.measurements)
    value = average_utility(chsh_game, behavior_from_quantum(chsh_game, product))
    assert value <= 0.75 + 1e-12


def test_unnormalized_state():
    strategy = chsh_optimal_strategy()
    broken = QuantumStrategy((2, 2), 2 * maximally_entangled_pair(), strategy.measurements)
    with pytest.raises(InvalidState):
        validate_qstrategy(broken)
    assert not validate_qstrategy(broken, strict=False).passed


def test_non_projector():
    strategy = chsh_optimal_strategy()
    party0 = np.array(strategy.measurements[0])
    party0[1, 0] = 0.5 * np.eye(2)
    party0[1, 1] = 0.5 * np.eye(2)
    broken = QuantumStrategy((2, 2), strategy.state, (party0, strategy.measurements[1]))
    with pytest.raises(NonProjective) as info:
        validate_qstrategy(broken)
    assert (info.value.party, info.value.input_index) == (0, 1)


def test_incomplete_measurement():
    strategy = chsh_optimal_strategy()
    party1 = np.array(strategy.measurements[1])
    party1[0, 1] = np.zeros((2, 2))
    broken = QuantumStrategy((2, 2), strategy.state, (strategy.measurements[0], party1))
    with pytest.raises(IncompleteMeasurement) as info:
        validate_qstrategy(broken)
    assert (info.value.party, info.value.input_index) == (1, 0)


def test_shape_checks(ghz_game):
    with pytest.raises(ShapeMismatch):
        behavior_from_quantum(ghz_game, chsh_optimal_strategy())
    with pytest.raises(ShapeMismatch):
        validate_qstrategy(QuantumStrategy((2, 2), np.ones(3), chsh_optimal_strategy().measurements))


def test_strategy_file(tmp_path):
    path = tmp_path / "chsh-q.json"
    dump_strategy(chsh_optimal_strategy(), path)
    loaded = load_strategy(path)
    assert validate_qstrategy(loaded).passed
    game = chsh()
    assert average_utility(game, behavior_from_quantum(game, loaded)) == pytest.approx(
        TSIRELSON, abs=1e-12
    )


def test_bell_violation():
    assert bell_violation(0.75, TSIRELSON).violated
    assert bell_violation(0.75, TSIRELSON).gap == pytest.approx(TSIRELSON - 0.75)
    assert not bell_violation(0.75, 0.75).violated


def random_unitary(rng, dim):
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def rotate_party(strategy, party, unitary):
    """Apply `unitary` to one party's factor of the state and conjugate its projectors."""
    factors = [np.eye(d) for d in strategy.dims]
    factors[party] = unitary
    full = factors[0]
    for factor in factors[1:]:
        full = np.kron(full, factor)
    measurements = list(strategy.measurements)
    measurements[party] = unitary @ measurements[party] @ unitary.conj().T
    return QuantumStrategy(strategy.dims, full @ strategy.state, tuple(measurements))


@pytest.mark.parametrize("seed", range(5))
def test_local_unitaries_leave_the_behavior_unchanged(seed, chsh_game, ghz_game):
    rng = np.random.default_rng(seed)
    for game, strategy in ((chsh_game, chsh_optimal_strategy()), (ghz_game, ghz_optimal_strategy())):
        before = behavior_from_quantum(game, strategy).table
        party = int(rng.integers(game.n_parties))
        rotated = rotate_party(strategy, party, random_unitary(rng, strategy.dims[party]))
        after = behavior_from_quantum(game, rotated).table
        assert np.allclose(before, after, atol=1e-9, rtol=0)


def test_strategy_dict_round_trip_is_exact():
    rng = np.random.default_rng(11)
    strategy = rotate_party(chsh_optimal_strategy(), 1, random_unitary(rng, 2))
    restored = strategy_from_dict(json.loads(json.dumps(strategy_to_dict(strategy))))
    assert restored.dims == strategy.dims
    assert np.array_equal(restored.state, strategy.state)
    for mine, theirs in zip(restored.measurements, strategy.measurements):
        assert np.array_equal(mine, theirs)
