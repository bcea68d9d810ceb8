import json

import numpy as np
import pytest
from pydantic import ValidationError

from telepathy.game.core import (
    average_utility,
    behavior_from_deterministic,
    behavior_to_dict,
    build_game,
    deterministic_from_labels,
    dump_game,
    joint_input_index,
    load_behavior,
    load_game,
    mix_behaviors,
    no_signaling_check,
    validate_game,
)
from telepathy.models.errors import (
    BadWeights,
    DomainMismatch,
    DuplicateLabel,
    EmptySet,
    NegativeProbability,
    NonNormalizedDistribution,
    ShapeMismatch,
)
from telepathy.models.models import Behavior, DeterministicStrategy

BITS = ["0", "1"]


def test_chsh_constant_strategy_scores_three_quarters(chsh_game):
    strategy = DeterministicStrategy(((0, 0), (0, 0)))
    behavior = behavior_from_deterministic(chsh_game, strategy)
    assert average_utility(chsh_game, behavior) == pytest.approx(0.75, abs=1e-12)


def test_deterministic_behavior_is_point_mass(chsh_game):
    behavior = behavior_from_deterministic(chsh_game, DeterministicStrategy(((0, 1), (1, 1))))
    assert np.all(behavior.table.sum(axis=1) == 1.0)
    # Joint input (1, 0): party 0 outputs 1, party 1 outputs 1 -> joint output 3
    assert behavior.table[2, 3] == 1.0


def test_labels_to_strategy(chsh_game):
    strategy = deterministic_from_labels(
        chsh_game, {"0": {"0": "1", "1": "0"}, "1": {"0": "0", "1": "0"}}
    )
    assert strategy.tables == ((1, 0), (0, 0))
    assert strategy.to_labels(chsh_game)["0"] == {"0": "1", "1": "0"}


def test_labels_missing_input(chsh_game):
    with pytest.raises(DomainMismatch):
        deterministic_from_labels(chsh_game, {"0": {"0": "1"}, "1": {"0": "0", "1": "0"}})


def test_strategy_outside_output_set(chsh_game):
    with pytest.raises(DomainMismatch):
        behavior_from_deterministic(chsh_game, DeterministicStrategy(((0, 2), (0, 0))))


def test_mix_is_linear(chsh_game, pr_box):
    local = behavior_from_deterministic(chsh_game, DeterministicStrategy(((0, 0), (0, 0))))
    mixed = mix_behaviors([(0.5, local), (0.5, pr_box)])
    assert average_utility(chsh_game, mixed) == pytest.approx(0.875, abs=1e-12)


@pytest.mark.parametrize("weights", [[0.5, 0.6], [-0.5, 1.5]])
def test_mix_rejects_bad_weights(pr_box, weights):
    with pytest.raises(BadWeights):
        mix_behaviors([(w, pr_box) for w in weights])


def test_pr_box_is_no_signaling(pr_box):
    report = no_signaling_check(pr_box)
    assert report.passed
    assert report.max_violation == pytest.approx(0.0, abs=1e-15)


def test_signaling_behavior_detected():
    # Party 1 copies party 0's input
    table = np.zeros((4, 4))
    for x in range(2):
        for y in range(2):
            table[x * 2 + y, x] = 1.0
    report = no_signaling_check(Behavior((2, 2), (2, 2), table))
    assert not report.passed
    assert report.max_violation == pytest.approx(1.0)


def test_validation_errors():
    pi = [0.25] * 4
    utility = np.zeros(16)
    with pytest.raises(EmptySet):
        build_game([[], BITS], [BITS, BITS], [1.0], np.zeros(0))
    with pytest.raises(DuplicateLabel):
        build_game([["0", "0"], BITS], [BITS, BITS], pi, utility)
    with pytest.raises(ShapeMismatch):
        build_game([BITS, BITS], [BITS, BITS], [0.5, 0.5], utility)
    with pytest.raises(NegativeProbability):
        build_game([BITS, BITS], [BITS, BITS], [0.5, 0.5, 0.5, -0.5], utility)
    with pytest.raises(NonNormalizedDistribution):
        build_game([BITS, BITS], [BITS, BITS], [0.25, 0.25, 0.25, 0.2], utility)
    with pytest.raises(ShapeMismatch):
        build_game([BITS, BITS], [BITS, BITS], pi, np.zeros(15))


def test_validate_game_checks_party_count():
    with pytest.raises(ShapeMismatch):
        validate_game(
            {"parties": 3, "inputs": [BITS], "outputs": [BITS], "pi": [0.5, 0.5], "utility": [0] * 4}
        )


def test_game_file_round_trip(tmp_path, chsh_game):
    path = tmp_path / "chsh.json"
    dump_game(chsh_game, path)
    loaded = load_game(path)
    assert loaded.inputs == chsh_game.inputs
    assert np.array_equal(loaded.utility, chsh_game.utility)


def test_game_file_rejects_unknown_fields(write_json):
    path = write_json(
        "bad.json",
        {"parties": 1, "inputs": [BITS], "outputs": [BITS], "pi": [0.5, 0.5], "utility": [0] * 4, "x": 1},
    )
    with pytest.raises(ValidationError):
        load_game(path)


def test_behavior_file(tmp_path, write_json, pr_box):
    loaded = load_behavior(write_json("pr.json", behavior_to_dict(pr_box)))
    assert np.array_equal(loaded.table, pr_box.table)
    broken = tmp_path / "broken.json"
    broken.write_text("{\"input_sizes\": [2, 2],")
    with pytest.raises(json.JSONDecodeError):
        load_behavior(broken)


def test_joint_input_index(chsh_game):
    assert joint_input_index(chsh_game, ["1", "0"]) == 2


def random_behavior(rng, game):
    table = rng.dirichlet(np.ones(game.utility.shape[1]), size=game.utility.shape[0])
    return Behavior(game.input_sizes, game.output_sizes, table)


@pytest.mark.parametrize("seed", range(10))
def test_average_utility_is_bounded_and_linear(random_game, seed):
    rng = np.random.default_rng(seed)
    game = random_game(rng, n_parties=int(rng.integers(2, 4)))
    first, second = random_behavior(rng, game), random_behavior(rng, game)
    for behavior in (first, second):
        value = average_utility(game, behavior)
        assert game.utility.min() - 1e-12 <= value <= game.utility.max() + 1e-12
    weight = float(rng.random())
    mixed = mix_behaviors([(weight, first), (1 - weight, second)])
    expected = weight * average_utility(game, first) + (1 - weight) * average_utility(game, second)
    assert average_utility(game, mixed) == pytest.approx(expected, abs=1e-12)
