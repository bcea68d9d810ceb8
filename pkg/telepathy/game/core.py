"""
Game core for Telepathy.

Canonical game and behavior representations, validation, and the average-utility
evaluator every other module builds on.
"""

import itertools
import json
import logging
import math
from pathlib import Path
from typing import Dict, List, Mapping, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from telepathy.game.indexing import flatten, index_grid, strides
from telepathy.models.errors import (
    BadWeights,
    DomainMismatch,
    DuplicateLabel,
    EmptySet,
    NegativeProbability,
    NonNormalizedDistribution,
    ShapeMismatch,
    SpecInvalid,
)
from telepathy.models.models import (
    Behavior,
    DeterministicStrategy,
    NoSignalingReport,
    ValidatedGame,
)

logger = logging.getLogger("telepathy.game.core")

# Tolerance for sums that should be exact (pi, mixture weights)
EXACT_TOL = 1e-12


class GameSpec(BaseModel):
    """JSON game file. `pi` and `utility` are flat arrays in JointIndex order."""

    model_config = ConfigDict(extra="forbid")

    parties: int = Field(ge=1)
    inputs: List[List[str]]
    outputs: List[List[str]]
    pi: List[float]
    utility: List[float]


def validate_game(spec: Union[GameSpec, Mapping]) -> ValidatedGame:
    """
    Check every GameSpec invariant and return a frozen, index-resolved game.

    Args:
        spec: Game description (model or raw mapping)

    Returns:
        ValidatedGame: Validated game
    """
    if not isinstance(spec, GameSpec):
        spec = GameSpec.model_validate(spec)
    if len(spec.inputs) != spec.parties or len(spec.outputs) != spec.parties:
        raise ShapeMismatch(
            f"'parties' is {spec.parties} but 'inputs' has {len(spec.inputs)} and "
            f"'outputs' has {len(spec.outputs)} sets"
        )
    return build_game(spec.inputs, spec.outputs, spec.pi, spec.utility)


def build_game(
    inputs: Sequence[Sequence[str]],
    outputs: Sequence[Sequence[str]],
    pi: Union[Sequence[float], np.ndarray],
    utility: Union[Sequence[float], np.ndarray],
) -> ValidatedGame:
    """
    Validate raw tables and build a game.

    Args:
        inputs: Input labels per party
        outputs: Output labels per party
        pi: Joint input distribution, flat
        utility: Utility table, flat or (joint inputs, joint outputs)

    Returns:
        ValidatedGame: Validated game
    """
    if len(inputs) != len(outputs):
        raise ShapeMismatch(f"{len(inputs)} input sets but {len(outputs)} output sets")
    if not inputs:
        raise EmptySet("A game needs at least one party")
    for name, sets in (("inputs", inputs), ("outputs", outputs)):
        for party, labels in enumerate(sets):
            if len(labels) == 0:
                raise EmptySet(f"'{name}[{party}]' is empty")
            if len(set(labels)) != len(labels):
                raise DuplicateLabel(f"'{name}[{party}]' has duplicate labels")

    n_inputs = math.prod(len(labels) for labels in inputs)
    n_outputs = math.prod(len(labels) for labels in outputs)

    pi = np.asarray(pi, dtype=np.float64).reshape(-1)
    if pi.size != n_inputs:
        raise ShapeMismatch(f"'pi' has {pi.size} entries, expected {n_inputs}")
    if not np.all(np.isfinite(pi)):
        raise SpecInvalid("'pi' has non-finite entries")
    if np.any(pi < 0):
        index = int(np.argmin(pi))
        raise NegativeProbability(f"'pi[{index}]' is negative ({pi[index]})")
    total = math.fsum(pi.tolist())
    if abs(total - 1.0) > EXACT_TOL:
        raise NonNormalizedDistribution(f"'pi' sums to {total!r}, expected 1")

    utility = np.asarray(utility, dtype=np.float64)
    if utility.size != n_inputs * n_outputs:
        raise ShapeMismatch(
            f"'utility' has {utility.size} entries, expected {n_inputs} x {n_outputs} = "
            f"{n_inputs * n_outputs}"
        )
    utility = utility.reshape(n_inputs, n_outputs)
    if not np.all(np.isfinite(utility)):
        raise SpecInvalid("'utility' has non-finite entries")

    return ValidatedGame(
        inputs=tuple(tuple(str(label) for label in labels) for labels in inputs),
        outputs=tuple(tuple(str(label) for label in labels) for labels in outputs),
        pi=pi,
        utility=utility,
    )


def _check_shape(game: ValidatedGame, behavior: Behavior) -> None:
    if behavior.input_sizes != game.input_sizes or behavior.output_sizes != game.output_sizes:
        raise ShapeMismatch(
            f"Behavior shape {behavior.input_sizes}->{behavior.output_sizes} does not match "
            f"game shape {game.input_sizes}->{game.output_sizes}"
        )


def average_utility(game: ValidatedGame, behavior: Behavior) -> float:
    """
    Sum of pi(i) p(o|i) U(o,i) over all joint inputs and outputs.

    Args:
        game: Game
        behavior: Behavior with the game's shape

    Returns:
        float: Average utility
    """
    _check_shape(game, behavior)
    terms = game.pi[:, None] * behavior.table * game.utility
    return math.fsum(terms.ravel().tolist())


def behavior_from_deterministic(game: ValidatedGame, strat: DeterministicStrategy) -> Behavior:
    """
    Behavior realized by a deterministic strategy: every row is a point mass on the
    joint output (f_0(i_0), ..., f_{n-1}(i_{n-1})).

    Args:
        game: Game
        strat: Deterministic strategy (output index per input index, per party)

    Returns:
        Behavior: Point-mass behavior
    """
    check_deterministic(game, strat)
    grid = index_grid(game.input_sizes)
    out_strides = strides(game.output_sizes)
    joint_output = np.zeros(game.n_joint_inputs, dtype=np.int64)
    for party, table in enumerate(strat.tables):
        joint_output += np.asarray(table, dtype=np.int64)[grid[:, party]] * out_strides[party]

    table = np.zeros((game.n_joint_inputs, game.n_joint_outputs))
    table[np.arange(game.n_joint_inputs), joint_output] = 1.0
    return Behavior(game.input_sizes, game.output_sizes, table)


def check_deterministic(game: ValidatedGame, strat: DeterministicStrategy) -> None:
    """Raise DomainMismatch unless every f_j is total on I_j with values in O_j."""
    if len(strat.tables) != game.n_parties:
        raise DomainMismatch(
            f"Strategy has {len(strat.tables)} party tables, game has {game.n_parties} parties"
        )
    for party, table in enumerate(strat.tables):
        if len(table) != game.input_sizes[party]:
            raise DomainMismatch(
                f"Party {party} table covers {len(table)} inputs, "
                f"expected {game.input_sizes[party]}"
            )
        for input_index, output_index in enumerate(table):
            if not 0 <= output_index < game.output_sizes[party]:
                raise DomainMismatch(
                    f"Party {party} maps input '{game.inputs[party][input_index]}' to "
                    f"output index {output_index} outside its output set"
                )


def deterministic_from_labels(
    game: ValidatedGame, mapping: Mapping[str, Mapping[str, str]]
) -> DeterministicStrategy:
    """
    Build a strategy from party -> {input label: output label}.

    Args:
        game: Game providing the labels
        mapping: Label mapping keyed by party index (as string or int)

    Returns:
        DeterministicStrategy: Index-resolved strategy
    """
    tables = []
    for party in range(game.n_parties):
        entries = mapping.get(str(party), mapping.get(party))
        if entries is None:
            raise DomainMismatch(f"No table for party {party}")
        table = []
        for label in game.inputs[party]:
            if label not in entries:
                raise DomainMismatch(f"Party {party} has no output for input '{label}'")
            output = entries[label]
            if output not in game.outputs[party]:
                raise DomainMismatch(f"Party {party} output '{output}' is not an output label")
            table.append(game.output_index(party, output))
        tables.append(tuple(table))
    return DeterministicStrategy(tuple(tables))


def mix_behaviors(weighted: Sequence[Tuple[float, Behavior]]) -> Behavior:
    """
    Convex combination of behaviors.

    Args:
        weighted: (weight, behavior) pairs; weights non-negative and summing to 1

    Returns:
        Behavior: Mixed behavior
    """
    if not weighted:
        raise BadWeights("Nothing to mix")
    weights = [float(w) for w, _ in weighted]
    if any(w < 0 or not math.isfinite(w) for w in weights):
        raise BadWeights(f"Mixture weights must be finite and non-negative: {weights}")
    if abs(math.fsum(weights) - 1.0) > EXACT_TOL:
        raise BadWeights(f"Mixture weights sum to {math.fsum(weights)!r}, expected 1")

    first = weighted[0][1]
    table = np.zeros_like(first.table)
    for weight, behavior in weighted:
        if not behavior.same_shape(first):
            raise ShapeMismatch("Cannot mix behaviors of different shapes")
        table += weight * behavior.table
    return Behavior(first.input_sizes, first.output_sizes, table)


def no_signaling_check(behavior: Behavior, tol: float = 1e-9) -> NoSignalingReport:
    """
    Check that the marginal of every proper subset of parties depends only on that
    subset's inputs. For two parties this is exactly the per-party marginal condition.

    Args:
        behavior: Behavior to check
        tol: Largest tolerated marginal discrepancy

    Returns:
        NoSignalingReport: Pass flag and the largest discrepancy found
    """
    n = behavior.n_parties
    tensor = behavior.table.reshape(behavior.input_sizes + behavior.output_sizes)
    worst = 0.0
    for size in range(1, n):
        for subset in itertools.combinations(range(n), size):
            others = [k for k in range(n) if k not in subset]
            marginal = tensor.sum(axis=tuple(n + k for k in others))
            spread = marginal.max(axis=tuple(others)) - marginal.min(axis=tuple(others))
            worst = max(worst, float(spread.max()))
    return NoSignalingReport(passed=worst <= tol, max_violation=worst)


# --- files ---


def game_to_dict(game: ValidatedGame) -> dict:
    return {
        "parties": game.n_parties,
        "inputs": [list(labels) for labels in game.inputs],
        "outputs": [list(labels) for labels in game.outputs],
        "pi": game.pi.tolist(),
        "utility": game.utility.ravel().tolist(),
    }


def load_game(path: Union[str, Path]) -> ValidatedGame:
    """
    Load and validate a JSON game file.

    Args:
        path: File path

    Returns:
        ValidatedGame: Validated game
    """
    data = json.loads(Path(path).read_text())
    game = validate_game(GameSpec.model_validate(data))
    logger.debug(
        f"Loaded game from {path}: {game.n_parties} parties, "
        f"{game.n_joint_inputs} joint inputs, {game.n_joint_outputs} joint outputs"
    )
    return game


def dump_game(game: ValidatedGame, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(game_to_dict(game)) + "\n")


def behavior_to_dict(behavior: Behavior) -> dict:
    return {
        "input_sizes": list(behavior.input_sizes),
        "output_sizes": list(behavior.output_sizes),
        "table": behavior.table.tolist(),
    }


def behavior_from_dict(data: Dict) -> Behavior:
    try:
        return Behavior(
            tuple(data["input_sizes"]), tuple(data["output_sizes"]), np.asarray(data["table"])
        )
    except KeyError as e:
        raise SpecInvalid(f"Behavior file is missing field {e}") from e


def load_behavior(path: Union[str, Path]) -> Behavior:
    return behavior_from_dict(json.loads(Path(path).read_text()))


def dump_behavior(behavior: Behavior, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(behavior_to_dict(behavior)) + "\n")


def joint_input_index(game: ValidatedGame, labels: Sequence[str]) -> int:
    """Joint input index of a tuple of input labels."""
    return flatten(
        [game.input_index(party, label) for party, label in enumerate(labels)],
        game.input_sizes,
    )
