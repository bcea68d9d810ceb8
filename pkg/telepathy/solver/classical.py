"""
Classical solver for Telepathy.

Exact classical and latency-constrained classical values by exhaustive enumeration of
deterministic strategies. Shared randomness is a mixture of deterministic strategies, so
the maximum over deterministic strategies is the classical value.

A strategy is encoded as a mixed-radix integer: party 0's outputs come first (most
significant), and within a party the output for local key 0 comes first. The index
order is therefore the lexicographic order of the output tables, and ties are broken by
the smallest index.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from telepathy.game.indexing import index_grid, strides
from telepathy.models.errors import BudgetExceeded, ShapeMismatch
from telepathy.models.models import (
    CommGraph,
    DeterministicStrategy,
    LCDeterministicStrategy,
    ValidatedGame,
)

logger = logging.getLogger("telepathy.solver.classical")

DEFAULT_BUDGET = 100_000_000
DEFAULT_CHUNK_SIZE = 65536
# Strategy values this close count as tied
TIE_TOL = 1e-12


@dataclass(frozen=True)
class ClassicalValue:
    c_star: float
    witness: DeterministicStrategy
    visited: int


@dataclass(frozen=True)
class LCClassicalValue:
    c_star: float
    witness: LCDeterministicStrategy
    visited: int


def _view_domains(game: ValidatedGame, views: Sequence[Tuple[int, ...]]) -> List[int]:
    return [math.prod(game.input_sizes[k] for k in view) for view in views]


def _space_size(game: ValidatedGame, views: Sequence[Tuple[int, ...]]) -> int:
    return math.prod(
        game.output_sizes[party] ** domain
        for party, domain in enumerate(_view_domains(game, views))
    )


def strategy_space_size(game: ValidatedGame) -> int:
    """
    Number of deterministic strategies, prod_j |O_j|^|I_j|, as an exact integer.
    """
    return _space_size(game, [(j,) for j in range(game.n_parties)])


def lc_strategy_space_size(game: ValidatedGame, comm: CommGraph) -> int:
    """Number of LC deterministic strategies for a communication graph."""
    return _space_size(game, _views(game, comm))


def _views(game: ValidatedGame, comm: CommGraph) -> Tuple[Tuple[int, ...], ...]:
    if comm.n_parties != game.n_parties:
        raise ShapeMismatch(
            f"Communication graph has {comm.n_parties} parties, game has {game.n_parties}"
        )
    return tuple(comm.in_neighborhood(j) for j in range(game.n_parties))


class _Enumerator:
    """
    Evaluates every strategy of a given view structure in chunks of consecutive indices.
    """

    def __init__(self, game: ValidatedGame, views: Sequence[Tuple[int, ...]]):
        self.game = game
        self.views = tuple(views)
        self.domains = _view_domains(game, views)
        self.size = _space_size(game, views)

        # Digit layout: one digit per (party, local key), party 0 first
        self.offsets = np.concatenate([[0], np.cumsum(self.domains)[:-1]]).astype(np.int64)
        self.bases = np.concatenate(
            [np.full(d, game.output_sizes[j], dtype=np.int64) for j, d in enumerate(self.domains)]
        )

        # Joint inputs with zero probability never contribute
        grid = index_grid(game.input_sizes)
        support = np.flatnonzero(game.pi > 0)
        self.weights = game.pi[support, None] * game.utility[support]
        self.rows = np.arange(len(support))
        self.digit_columns = []
        for party, view in enumerate(self.views):
            local_sizes = [game.input_sizes[k] for k in view]
            local_keys = grid[support][:, list(view)] @ strides(local_sizes)
            self.digit_columns.append(self.offsets[party] + local_keys)
        self.output_strides = strides(game.output_sizes)

    def decode(self, indices: np.ndarray) -> np.ndarray:
        """Digits of each strategy index, shape (len(indices), n_digits)."""
        remaining = indices.copy()
        digits = np.empty((len(indices), len(self.bases)), dtype=np.int64)
        for position in range(len(self.bases) - 1, -1, -1):
            remaining, digits[:, position] = np.divmod(remaining, self.bases[position])
        return digits

    def evaluate(self, start: int, stop: int) -> Tuple[float, int, int]:
        """
        Best (value, index) among strategies [start, stop) and the number evaluated.
        """
        digits = self.decode(np.arange(start, stop, dtype=np.int64))
        joint_output = np.zeros((stop - start, len(self.rows)), dtype=np.int64)
        for party, columns in enumerate(self.digit_columns):
            joint_output += digits[:, columns] * self.output_strides[party]
        values = self.weights[self.rows[None, :], joint_output].sum(axis=1)
        top = float(values.max())
        best = int(np.flatnonzero(values >= top - TIE_TOL)[0])
        return top, start + best, stop - start

    def tables(self, index: int) -> Tuple[Tuple[int, ...], ...]:
        digits = self.decode(np.array([index], dtype=np.int64))[0]
        return tuple(
            tuple(int(d) for d in digits[offset : offset + domain])
            for offset, domain in zip(self.offsets, self.domains)
        )


def _maximize(
    game: ValidatedGame,
    views: Sequence[Tuple[int, ...]],
    budget: int,
    workers: int,
    chunk_size: int,
) -> Tuple[float, Tuple[Tuple[int, ...], ...], int]:
    enumerator = _Enumerator(game, views)
    if enumerator.size > budget:
        raise BudgetExceeded(enumerator.size, budget)

    chunks = [
        (start, min(start + chunk_size, enumerator.size))
        for start in range(0, enumerator.size, chunk_size)
    ]
    logger.debug(
        f"Enumerating {enumerator.size} strategies in {len(chunks)} chunks "
        f"with {workers} worker(s)"
    )
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda c: enumerator.evaluate(*c), chunks))
    else:
        results = [enumerator.evaluate(*c) for c in chunks]

    best_value: Optional[float] = None
    best_index = 0
    visited = 0
    # Chunks are in index order, so only a clear improvement moves the witness
    for value, index, count in results:
        visited += count
        if best_value is None or value > best_value + TIE_TOL:
            best_value, best_index = value, index
        elif value > best_value:
            best_value = value

    if visited != enumerator.size:
        raise RuntimeError(f"Visited {visited} strategies, expected {enumerator.size}")
    return float(best_value), enumerator.tables(best_index), visited


def classical_value(
    game: ValidatedGame,
    budget: int = DEFAULT_BUDGET,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> ClassicalValue:
    """
    Exact classical value c* and a witness strategy attaining it.

    Args:
        game: Game
        budget: Largest strategy space the caller allows
        workers: Threads used for chunk evaluation
        chunk_size: Strategies evaluated per chunk

    Returns:
        ClassicalValue: c*, the lexicographically smallest maximizer and the count of
        strategies visited
    """
    views = [(j,) for j in range(game.n_parties)]
    value, tables, visited = _maximize(game, views, budget, workers, chunk_size)
    logger.info(f"Classical value {value:.12g} over {visited} deterministic strategies")
    return ClassicalValue(value, DeterministicStrategy(tables), visited)


def lc_classical_value(
    game: ValidatedGame,
    comm: CommGraph,
    budget: int = DEFAULT_BUDGET,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> LCClassicalValue:
    """
    Exact LC classical value: party j's output is any function of the inputs of its
    in-neighborhood in `comm` (one-hop sharing only).

    Args:
        game: Game
        comm: Communication graph with one node per party
        budget: Largest strategy space the caller allows
        workers: Threads used for chunk evaluation
        chunk_size: Strategies evaluated per chunk

    Returns:
        LCClassicalValue: c*_G, the lexicographically smallest maximizer and the count
        of strategies visited
    """
    views = _views(game, comm)
    value, tables, visited = _maximize(game, views, budget, workers, chunk_size)
    logger.info(
        f"LC classical value {value:.12g} over {visited} strategies "
        f"({len(comm.edges)} communication edge(s))"
    )
    return LCClassicalValue(value, LCDeterministicStrategy(views, tables), visited)


def full_information_value(game: ValidatedGame) -> float:
    """
    Sum over inputs of pi(i) max_o U(o,i): the value when every party sees every input.
    """
    return math.fsum((game.pi * game.utility.max(axis=1)).tolist())
