"""
Shared fixtures for the Telepathy tests.
"""

import json

import numpy as np
import pytest

from telepathy.catalog.games import chsh, ghz
from telepathy.game.core import build_game, game_to_dict
from telepathy.models.models import Behavior
from telepathy.quantum.strategy import behavior_from_quantum, chsh_optimal_strategy


@pytest.fixture
def chsh_game():
    return chsh()


@pytest.fixture
def ghz_game():
    return ghz()


@pytest.fixture
def chsh_quantum_behavior(chsh_game):
    return behavior_from_quantum(chsh_game, chsh_optimal_strategy())


@pytest.fixture
def pr_box():
    """Maximally nonlocal no-signaling box: wins CHSH with certainty."""
    table = np.zeros((4, 4))
    for x in range(2):
        for y in range(2):
            for a in range(2):
                b = a ^ (x & y)
                table[x * 2 + y, a * 2 + b] = 0.5
    return Behavior((2, 2), (2, 2), table)


@pytest.fixture
def write_json(tmp_path):
    """Write a JSON document into tmp_path and return its path."""

    def write(name, data):
        path = tmp_path / name
        path.write_text(json.dumps(data))
        return path

    return write


@pytest.fixture
def chsh_file(write_json, chsh_game):
    return write_json("chsh.json", game_to_dict(chsh_game))


def _random_game(rng: np.random.Generator, n_parties: int, max_size: int = 3):
    input_sizes = rng.integers(1, max_size + 1, size=n_parties)
    output_sizes = rng.integers(1, max_size + 1, size=n_parties)
    inputs = [[f"i{k}" for k in range(s)] for s in input_sizes]
    outputs = [[f"o{k}" for k in range(s)] for s in output_sizes]
    n_inputs = int(np.prod(input_sizes))
    n_outputs = int(np.prod(output_sizes))
    pi = rng.random(n_inputs)
    pi /= pi.sum()
    # Renormalize in plain Python so the sum is 1 within the game's exact tolerance
    pi[-1] = 1.0 - float(np.sum(pi[:-1]))
    utility = rng.random((n_inputs, n_outputs))
    return build_game(inputs, outputs, pi, utility)


@pytest.fixture
def random_game():
    """Factory for random games with up to `max_size` inputs and outputs per party."""
    return _random_game
