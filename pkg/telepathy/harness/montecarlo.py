"""
Monte Carlo estimate of a behavior's average utility.
"""

import logging
import math
from typing import NamedTuple, Sequence, Tuple

import numpy as np

from telepathy.models.errors import ShapeMismatch, SpecInvalid
from telepathy.models.models import Behavior, ValidatedGame

logger = logging.getLogger("telepathy.harness.montecarlo")

# Rounds sampled per vectorized batch
BATCH_ROUNDS = 65536


class MonteCarloResult(NamedTuple):
    mean: float
    std_err: float
    n_rounds: int


def mean_and_std_err(values: Sequence[float]) -> Tuple[float, float]:
    """Mean and sample std / sqrt(n) of per-round utilities; (0, 0) when empty."""
    if not values:
        return 0.0, 0.0
    n = len(values)
    mean = math.fsum(values) / n
    if n == 1:
        return mean, 0.0
    variance = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(variance / n)


def sample_rounds(
    game: ValidatedGame, behavior: Behavior, n_rounds: int, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Draw joint inputs from pi and joint outputs from the behavior.

    Args:
        game: Game providing pi
        behavior: Behavior p(o|i)
        n_rounds: Rounds to draw
        rng: Random generator

    Returns:
        Tuple[np.ndarray, np.ndarray]: Joint input and joint output indices
    """
    inputs = rng.choice(game.n_joint_inputs, size=n_rounds, p=game.pi)
    cdf = np.cumsum(behavior.table[inputs], axis=1)
    draws = rng.random(n_rounds)
    outputs = (cdf < draws[:, None]).sum(axis=1)
    # cumsum can end a hair below 1
    np.minimum(outputs, game.n_joint_outputs - 1, out=outputs)
    return inputs, outputs


def monte_carlo(
    game: ValidatedGame, behavior: Behavior, n_rounds: int, seed: int = 0
) -> MonteCarloResult:
    """
    Empirical average utility over independent rounds.

    Args:
        game: Game
        behavior: Behavior with the game's shape
        n_rounds: Number of rounds, at least 1
        seed: Seed of the random generator

    Returns:
        MonteCarloResult: Mean, standard error (sample std / sqrt(n)) and round count
    """
    if n_rounds < 1:
        raise SpecInvalid(f"Need at least one round, got {n_rounds}")
    if behavior.input_sizes != game.input_sizes or behavior.output_sizes != game.output_sizes:
        raise ShapeMismatch("Behavior shape does not match the game")

    rng = np.random.default_rng(seed)
    total = 0.0
    total_sq = 0.0
    remaining = n_rounds
    while remaining > 0:
        batch = min(remaining, BATCH_ROUNDS)
        inputs, outputs = sample_rounds(game, behavior, batch, rng)
        utilities = game.utility[inputs, outputs]
        total += math.fsum(utilities.tolist())
        total_sq += math.fsum((utilities * utilities).tolist())
        remaining -= batch

    mean = total / n_rounds
    # Sample variance, n - 1 denominator
    variance = max(total_sq - total * mean, 0.0) / (n_rounds - 1) if n_rounds > 1 else 0.0
    std_err = math.sqrt(variance / n_rounds)
    logger.info(f"Monte Carlo over {n_rounds} rounds: mean {mean:.6f}, std err {std_err:.2e}")
    return MonteCarloResult(mean, std_err, n_rounds)
