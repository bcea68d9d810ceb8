"""
Seesaw optimization for Telepathy.

Alternating ascent on the average utility of a quantum strategy: each party's
measurements are re-optimized with everything else fixed, then the state is replaced by
a top eigenvector of the game operator. Every step is non-decreasing, so the returned
value is a lower bound on the quantum value.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy.linalg import eigh
from scipy.sparse.linalg import LinearOperator, eigsh

from telepathy.game.core import average_utility
from telepathy.game.indexing import index_grid
from telepathy.models.errors import DimensionCap, ShapeMismatch
from telepathy.models.models import QuantumStrategy, ValidatedGame
from telepathy.quantum.strategy import behavior_from_quantum, measured_amplitudes

logger = logging.getLogger("telepathy.quantum.seesaw")

MONOTONE_SLACK = 1e-10
# Joint dimension above which the state update uses a matrix-free eigensolver
DENSE_STATE_LIMIT = 256
# Eigenvalues this close to zero count as ties and go to the lower output label
TIE_TOL = 1e-12

_MASK64 = (1 << 64) - 1
_GOLDEN_GAMMA = 0x9E3779B97F4A7C15


class SeesawConfig(BaseModel):
    max_iters: int = Field(200, ge=1)
    restarts: int = Field(5, ge=1)
    seed: int = 0
    convergence_eps: float = Field(1e-10, gt=0)
    workers: int = Field(1, ge=1)
    dimension_cap: int = Field(4096, ge=1)
    # Stop launching restarts once this value is reached
    target: Optional[float] = None


@dataclass
class RestartResult:
    restart: int
    seed: int
    value: float
    strategy: QuantumStrategy
    trace: List[float]
    converged: bool


@dataclass
class SeesawResult:
    q_lower: float
    strategy: QuantumStrategy
    trace: List[float]
    converged: bool
    dims: Tuple[int, ...]
    best_restart: int
    restart_values: List[float] = field(default_factory=list)
    target_reached: Optional[bool] = None


def splitmix64(value: int) -> int:
    """One splitmix64 output for the given state."""
    z = (value + _GOLDEN_GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def restart_seed(base_seed: int, restart: int) -> int:
    """Seed of restart r: the r-th splitmix64 output from the base seed."""
    return splitmix64((base_seed + restart * _GOLDEN_GAMMA) & _MASK64)


def random_projective_measurement(
    rng: np.random.Generator,
    dim: int,
    n_outputs: int,
    live: Optional[Sequence[int]] = None,
) -> np.ndarray:
    """
    Projectors from a Haar-random orthonormal basis, basis vectors dealt to outputs in
    a random order.

    Args:
        rng: Random generator
        dim: Local dimension
        n_outputs: Number of outputs
        live: Outputs that receive basis vectors (default: all)

    Returns:
        np.ndarray: Projectors, shape (n_outputs, dim, dim)
    """
    live = np.arange(n_outputs) if live is None else np.asarray(live)
    gaussian = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(gaussian)
    phases = np.diag(r) / np.abs(np.diag(r))
    q = q * phases[None, :]
    order = live[rng.permutation(len(live))]
    projectors = np.zeros((n_outputs, dim, dim), dtype=np.complex128)
    for column in range(dim):
        vector = q[:, column]
        projectors[order[column % len(order)]] += np.outer(vector, vector.conj())
    return projectors


def _hermitize(matrix: np.ndarray) -> np.ndarray:
    return (matrix + matrix.conj().swapaxes(-1, -2)) / 2


def _range_basis(projector: np.ndarray) -> np.ndarray:
    values, vectors = eigh(_hermitize(projector))
    return vectors[:, values > 0.5]


def live_outputs(game: ValidatedGame, party: int) -> List[np.ndarray]:
    """
    Outputs of `party` worth giving rank to, per input.

    An output that scores the row minimum against every choice of the other parties
    can never raise the objective, so it stays empty. Inputs where every output is
    like that keep all outputs.
    """
    n_outputs = game.output_sizes[party]
    grid = index_grid(game.input_sizes)
    dead = np.ones((game.input_sizes[party], n_outputs), dtype=bool)
    for row in np.flatnonzero(game.pi > 0):
        table = np.moveaxis(game.utility[row].reshape(game.output_sizes), party, 0)
        table = table.reshape(n_outputs, -1)
        dead[grid[row, party]] &= np.all(table <= table.min(), axis=1)
    live = []
    for flags in dead:
        outputs = np.flatnonzero(~flags)
        live.append(outputs if len(outputs) else np.arange(n_outputs))
    return live


def assign_eigenvectors(
    projectors: np.ndarray, effective: np.ndarray, live: np.ndarray
) -> np.ndarray:
    """
    Rebuild a measurement from the eigenbasis of sum_o E_o Pi_o: each eigenvector goes
    to the live output whose effective operator has the largest expectation on it,
    ties to the lower output label.
    """
    lagrangian = _hermitize(np.einsum("oab,obc->ac", effective, projectors))
    _, vectors = eigh(lagrangian)
    scores = np.einsum("ak,oab,bk->ko", vectors.conj(), effective[live], vectors).real
    assigned = np.zeros_like(projectors)
    for column, owner in enumerate(live[np.argmax(scores, axis=1)]):
        vector = vectors[:, column]
        assigned[owner] += np.outer(vector, vector.conj())
    return assigned


def resplit_pairs(projectors: np.ndarray, effective: np.ndarray, live: np.ndarray) -> np.ndarray:
    """
    For live outputs a < b, re-split the subspace of Pi_a + Pi_b between them, sending
    eigenvectors of E_a - E_b with nonnegative eigenvalue to a. Each re-split is
    optimal for its pair.
    """
    updated = projectors.copy()
    for position, a in enumerate(live):
        for b in live[position + 1:]:
            basis = _range_basis(updated[a] + updated[b])
            if basis.shape[1] == 0:
                continue
            difference = basis.conj().T @ (effective[a] - effective[b]) @ basis
            values, vectors = eigh(_hermitize(difference))
            to_a = values >= -TIE_TOL
            va = basis @ vectors[:, to_a]
            vb = basis @ vectors[:, ~to_a]
            updated[a] = va @ va.conj().T
            updated[b] = vb @ vb.conj().T
    return _snap_measurement(updated)


def improve_measurement(
    projectors: np.ndarray, effective: np.ndarray, live: np.ndarray
) -> np.ndarray:
    """
    Best-response step for one input's measurement.

    Two candidates are refined by pairwise re-splitting: the current measurement and
    its eigen-assignment. The better one wins, the current-derived one on a tie, so
    the step never lowers the objective.
    """
    candidates = [
        resplit_pairs(projectors, effective, live),
        resplit_pairs(assign_eigenvectors(projectors, effective, live), effective, live),
    ]
    values = [float(np.einsum("oab,oba->", c, effective).real) for c in candidates]
    return candidates[int(np.argmax(values))]


class _Seesaw:
    """One seesaw run from a random starting point."""

    def __init__(self, game: ValidatedGame, dims: Tuple[int, ...], rng: np.random.Generator):
        self.game = game
        self.dims = dims
        self.n = game.n_parties
        self.total_dimension = math.prod(dims)
        self.support = np.flatnonzero(game.pi > 0)
        self.input_grid = np.indices(game.input_sizes).reshape(self.n, -1).T

        self.live = [live_outputs(game, j) for j in range(self.n)]

        state = rng.standard_normal(self.total_dimension) + 1j * rng.standard_normal(self.total_dimension)
        self.state = state / np.linalg.norm(state)
        self.measurements = [
            np.array(
                [
                    random_projective_measurement(rng, dims[j], game.output_sizes[j], self.live[j][x])
                    for x in range(game.input_sizes[j])
                ]
            )
            for j in range(self.n)
        ]

    def strategy(self) -> QuantumStrategy:
        return QuantumStrategy(self.dims, self.state, tuple(m.copy() for m in self.measurements))

    def objective(self) -> float:
        return average_utility(self.game, behavior_from_quantum(self.game, self.strategy()))

    def _utility_tensor(self, row: int) -> np.ndarray:
        return self.game.utility[row].reshape(self.game.output_sizes)

    def effective_operators(self, party: int) -> np.ndarray:
        """
        E[x, o] such that the objective equals sum over x, o of Tr(Pi_{party,o}(x) E[x, o])
        with everything except party's measurements fixed.
        """
        dim = self.dims[party]
        effective = np.zeros(
            (self.game.input_sizes[party], self.game.output_sizes[party], dim, dim),
            dtype=np.complex128,
        )
        for row in self.support:
            joint_input = self.input_grid[row]
            operators = [
                None if k == party else self.measurements[k][joint_input[k]] for k in range(self.n)
            ]
            chi = measured_amplitudes(self.state, self.dims, operators)
            n_other_outputs = math.prod(
                self.game.output_sizes[k] for k in range(self.n) if k != party
            )
            chi = chi.reshape((n_other_outputs,) + self.dims)
            chi = np.moveaxis(chi, 1 + party, 1).reshape(n_other_outputs, dim, -1)
            reduced = np.einsum("mar,mbr->mab", chi, chi.conj())
            weights = np.moveaxis(self._utility_tensor(row), party, 0).reshape(
                self.game.output_sizes[party], n_other_outputs
            )
            effective[joint_input[party]] += self.game.pi[row] * np.einsum(
                "om,mab->oab", weights, reduced
            )
        return _hermitize(effective)

    @staticmethod
    def _value(projectors: np.ndarray, effective: np.ndarray) -> float:
        return float(np.einsum("xoab,xoba->", projectors, effective).real)

    def update_party(self, party: int) -> None:
        effective = self.effective_operators(party)
        before = self._value(self.measurements[party], effective)
        candidate = np.array(
            [
                improve_measurement(
                    self.measurements[party][x], effective[x], self.live[party][x]
                )
                for x in range(self.game.input_sizes[party])
            ]
        )
        after = self._value(candidate, effective)
        if after < before - MONOTONE_SLACK:
            logger.warning(
                f"Measurement update for party {party} lowered the objective "
                f"({before:.12f} -> {after:.12f}); keeping previous measurements"
            )
            return
        self.measurements[party] = candidate

    def game_operator_dense(self) -> np.ndarray:
        n = self.n
        operator = np.zeros((self.total_dimension, self.total_dimension), dtype=np.complex128)
        for row in self.support:
            joint_input = self.input_grid[row]
            args: List = [self._utility_tensor(row), list(range(n))]
            for j in range(n):
                args.extend([self.measurements[j][joint_input[j]], [j, n + j, 2 * n + j]])
            args.append(list(range(n, 3 * n)))
            term = np.einsum(*args, optimize=True)
            operator += self.game.pi[row] * term.reshape(self.total_dimension, self.total_dimension)
        return _hermitize(operator)

    def _apply_game_operator(self, vector: np.ndarray) -> np.ndarray:
        result = np.zeros(self.total_dimension, dtype=np.complex128)
        for row in self.support:
            joint_input = self.input_grid[row]
            operators = [self.measurements[j][joint_input[j]] for j in range(self.n)]
            amplitudes = measured_amplitudes(vector, self.dims, operators)
            contracted = np.tensordot(self._utility_tensor(row), amplitudes, axes=self.n)
            result += self.game.pi[row] * contracted.reshape(-1)
        return result

    def update_state(self) -> None:
        if self.total_dimension <= DENSE_STATE_LIMIT:
            _, vectors = eigh(self.game_operator_dense())
            top = vectors[:, -1]
        else:
            operator = LinearOperator(
                (self.total_dimension, self.total_dimension),
                matvec=self._apply_game_operator,
                dtype=np.complex128,
            )
            _, vectors = eigsh(operator, k=1, which="LA", v0=self.state)
            top = vectors[:, 0]
        self.state = top / np.linalg.norm(top)

    def run(self, max_iters: int, convergence_eps: float) -> Tuple[List[float], bool]:
        trace = [self.objective()]
        for iteration in range(max_iters):
            for party in range(self.n):
                self.update_party(party)
            self.update_state()
            value = self.objective()
            if value < trace[-1] - MONOTONE_SLACK:
                logger.warning(
                    f"Seesaw iteration {iteration} decreased the objective "
                    f"({trace[-1]:.12f} -> {value:.12f})"
                )
            trace.append(value)
            if abs(value - trace[-2]) < convergence_eps:
                return trace, True
        return trace, False


def _snap_measurement(projectors: np.ndarray) -> np.ndarray:
    """Re-orthonormalize the combined eigenbasis so drift cannot accumulate."""
    columns = []
    owners = []
    for output, projector in enumerate(projectors):
        basis = _range_basis(projector)
        columns.append(basis)
        owners.extend([output] * basis.shape[1])
    stacked = np.concatenate(columns, axis=1)
    if stacked.shape[1] != stacked.shape[0]:
        return projectors
    u, _, vh = np.linalg.svd(stacked)
    orthonormal = u @ vh
    snapped = np.zeros_like(projectors)
    for column, output in enumerate(owners):
        vector = orthonormal[:, column]
        snapped[output] += np.outer(vector, vector.conj())
    return snapped


def _run_restart(
    game: ValidatedGame, dims: Tuple[int, ...], cfg: SeesawConfig, restart: int
) -> RestartResult:
    seed = restart_seed(cfg.seed, restart)
    run = _Seesaw(game, dims, np.random.default_rng(seed))
    trace, converged = run.run(cfg.max_iters, cfg.convergence_eps)
    logger.debug(
        f"Restart {restart} (seed {seed}): {trace[-1]:.12f} after {len(trace) - 1} "
        f"iteration(s), converged={converged}"
    )
    return RestartResult(restart, seed, trace[-1], run.strategy(), trace, converged)


def seesaw_optimize(
    game: ValidatedGame, dims: Sequence[int], cfg: Optional[SeesawConfig] = None
) -> SeesawResult:
    """
    Lower-bound the quantum value of a game with seesaw iterations.

    Args:
        game: Game
        dims: Local dimension per party
        cfg: Iteration, restart and seed settings

    Returns:
        SeesawResult: Best value over restarts, its strategy and per-iteration trace
    """
    cfg = cfg or SeesawConfig()
    dims = tuple(int(d) for d in dims)
    if len(dims) != game.n_parties:
        raise ShapeMismatch(f"Got {len(dims)} dimensions for {game.n_parties} parties")
    if any(d < 1 for d in dims):
        raise ShapeMismatch(f"Local dimensions must be >= 1, got {dims}")
    if math.prod(dims) > cfg.dimension_cap:
        raise DimensionCap(math.prod(dims), cfg.dimension_cap)

    logger.info(
        f"Seesaw on dims {dims}: {cfg.restarts} restart(s), up to {cfg.max_iters} "
        f"iteration(s) each, base seed {cfg.seed}"
    )

    def reached(result: RestartResult) -> bool:
        return cfg.target is not None and result.value >= cfg.target

    results: List[RestartResult] = []
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(
                pool.map(lambda r: _run_restart(game, dims, cfg, r), range(cfg.restarts))
            )
    else:
        for restart in range(cfg.restarts):
            results.append(_run_restart(game, dims, cfg, restart))
            if reached(results[-1]):
                break

    best = results[0]
    for result in results[1:]:
        if result.value > best.value:
            best = result

    if not best.converged:
        logger.warning(f"Best restart {best.restart} did not converge in {cfg.max_iters} iterations")
    target_reached = None if cfg.target is None else best.value >= cfg.target
    if target_reached is False:
        logger.warning(
            f"Target {cfg.target} not reached after {len(results)} restart(s); "
            f"best value {best.value:.12f}"
        )
    logger.info(f"Seesaw lower bound {best.value:.12f} from restart {best.restart}")
    return SeesawResult(
        q_lower=best.value,
        strategy=best.strategy,
        trace=best.trace,
        converged=best.converged,
        dims=dims,
        best_restart=best.restart,
        restart_values=[r.value for r in results],
        target_reached=target_reached,
    )
