"""
Quantum strategies for Telepathy.

A quantum strategy is a pure state on the tensor product of the parties' local spaces
plus, for every party and input, a projective measurement with one projector per output
label. Behaviors follow the Born rule.
"""

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np

from telepathy.models.errors import (
    IncompleteMeasurement,
    InvalidState,
    NonProjective,
    NumericalDrift,
    ShapeMismatch,
    SpecInvalid,
)
from telepathy.models.models import Behavior, QuantumStrategy, ValidatedGame

logger = logging.getLogger("telepathy.quantum.strategy")

STATE_TOL = 1e-10
HERMITIAN_TOL = 1e-10
PROJECTOR_TOL = 1e-9
# Negative probabilities above this are floating dust and clamp to zero
NEGATIVE_DUST = -1e-12


@dataclass(frozen=True)
class QStrategyReport:
    """Worst residual found for each QuantumStrategy invariant."""

    state_norm: float
    hermitian: float
    idempotent: float
    orthogonal: float
    completeness: float

    @property
    def passed(self) -> bool:
        return (
            self.state_norm <= STATE_TOL
            and self.hermitian <= HERMITIAN_TOL
            and self.idempotent <= PROJECTOR_TOL
            and self.orthogonal <= PROJECTOR_TOL
            and self.completeness <= PROJECTOR_TOL
        )


def _norm(matrix: np.ndarray) -> float:
    return float(np.linalg.norm(matrix, ord=2)) if matrix.size else 0.0


def validate_qstrategy(q: QuantumStrategy, strict: bool = True) -> QStrategyReport:
    """
    Verify the state norm and that every measurement is projective and complete.

    Args:
        q: Strategy to check
        strict: Raise on the first violated invariant instead of only reporting

    Returns:
        QStrategyReport: Worst residual per invariant
    """
    if any(d < 1 for d in q.dims):
        raise ShapeMismatch(f"Local dimensions must be >= 1, got {q.dims}")
    if q.state.size != q.total_dimension:
        raise ShapeMismatch(
            f"State has length {q.state.size}, expected {q.total_dimension} for dims {q.dims}"
        )
    if len(q.measurements) != len(q.dims):
        raise ShapeMismatch(
            f"{len(q.measurements)} measurement sets for {len(q.dims)} parties"
        )

    state_norm = abs(float(np.linalg.norm(q.state)) - 1.0)
    if strict and state_norm > STATE_TOL:
        raise InvalidState(f"State norm deviates from 1 by {state_norm:.3e}")

    hermitian = idempotent = orthogonal = completeness = 0.0
    for party, (dim, projectors) in enumerate(zip(q.dims, q.measurements)):
        if projectors.ndim != 4 or projectors.shape[2:] != (dim, dim):
            raise ShapeMismatch(
                f"Party {party} measurements have shape {projectors.shape}, "
                f"expected (inputs, outputs, {dim}, {dim})"
            )
        identity = np.eye(dim)
        for input_index, measurement in enumerate(projectors):
            local_hermitian = max(_norm(p - p.conj().T) for p in measurement)
            local_idempotent = max(_norm(p @ p - p) for p in measurement)
            if strict and (local_hermitian > HERMITIAN_TOL or local_idempotent > PROJECTOR_TOL):
                raise NonProjective(
                    f"Party {party}, input {input_index}: not a projector "
                    f"(hermitian residual {local_hermitian:.3e}, "
                    f"idempotent residual {local_idempotent:.3e})",
                    party,
                    input_index,
                )
            local_orthogonal = max(
                (
                    _norm(measurement[a] @ measurement[b])
                    for a in range(len(measurement))
                    for b in range(a + 1, len(measurement))
                ),
                default=0.0,
            )
            local_completeness = _norm(measurement.sum(axis=0) - identity)
            if strict and (local_orthogonal > PROJECTOR_TOL or local_completeness > PROJECTOR_TOL):
                raise IncompleteMeasurement(
                    f"Party {party}, input {input_index}: projectors are not orthogonal "
                    f"or do not sum to the identity (orthogonality residual "
                    f"{local_orthogonal:.3e}, completeness residual {local_completeness:.3e})",
                    party,
                    input_index,
                )
            hermitian = max(hermitian, local_hermitian)
            idempotent = max(idempotent, local_idempotent)
            orthogonal = max(orthogonal, local_orthogonal)
            completeness = max(completeness, local_completeness)

    return QStrategyReport(state_norm, hermitian, idempotent, orthogonal, completeness)


def measured_amplitudes(
    state: np.ndarray, dims: Sequence[int], operators: Sequence[Optional[np.ndarray]]
) -> np.ndarray:
    """
    Apply one projector family per party to a state.

    Args:
        state: Vector (or tensor) over the joint space
        dims: Local dimensions
        operators: For each party an array (outputs, d, d), or None to leave the party
            unmeasured

    Returns:
        np.ndarray: Tensor with one output axis per measured party followed by one
        local axis per party
    """
    n = len(dims)
    tensor = np.asarray(state).reshape(tuple(dims))
    args: List = [tensor, list(range(n))]
    output_axes = []
    local_axes = []
    for party, ops in enumerate(operators):
        if ops is None:
            local_axes.append(party)
            continue
        args.extend([ops, [2 * n + party, n + party, party]])
        output_axes.append(2 * n + party)
        local_axes.append(n + party)
    args.append(output_axes + local_axes)
    return np.einsum(*args, optimize=True)


def _check_game_shape(game: ValidatedGame, q: QuantumStrategy) -> None:
    if len(q.dims) != game.n_parties:
        raise ShapeMismatch(f"Strategy has {len(q.dims)} parties, game has {game.n_parties}")
    for party, projectors in enumerate(q.measurements):
        expected = (game.input_sizes[party], game.output_sizes[party])
        if projectors.shape[:2] != expected:
            raise ShapeMismatch(
                f"Party {party} has measurements for {projectors.shape[:2]} "
                f"(inputs, outputs), game needs {expected}"
            )


def behavior_from_quantum(game: ValidatedGame, q: QuantumStrategy) -> Behavior:
    """
    Born-rule behavior p(o|i) = <psi| (x)_j Pi_{j,o_j}(i_j) |psi>.

    Args:
        game: Game fixing the input and output sets
        q: Valid quantum strategy

    Returns:
        Behavior: Realized behavior
    """
    _check_game_shape(game, q)
    n = game.n_parties
    table = np.empty((game.n_joint_inputs, game.n_joint_outputs))
    input_grid = np.indices(game.input_sizes).reshape(n, -1).T
    for row, joint_input in enumerate(input_grid):
        operators = [q.measurements[j][joint_input[j]] for j in range(n)]
        amplitudes = measured_amplitudes(q.state, q.dims, operators)
        probabilities = (np.abs(amplitudes) ** 2).sum(axis=tuple(range(n, 2 * n)))
        table[row] = probabilities.reshape(-1)

    if np.any(table < NEGATIVE_DUST):
        raise NumericalDrift(f"Born-rule probability {table.min():.3e} is negative")
    table = np.clip(table, 0.0, None)
    sums = table.sum(axis=1)
    drift = float(np.abs(sums - 1.0).max())
    if drift > PROJECTOR_TOL:
        raise NumericalDrift(f"Behavior rows drift from 1 by up to {drift:.3e}")
    return Behavior(game.input_sizes, game.output_sizes, table / sums[:, None])


# --- serialization ---


def _interleave(array: np.ndarray) -> np.ndarray:
    return np.stack([array.real, array.imag], axis=-1)


def strategy_to_dict(q: QuantumStrategy) -> dict:
    """
    JSON form: `state` is an interleaved (re, im) array; each measurement matrix is a
    list of rows, each row interleaved the same way.
    """
    return {
        "dims": list(q.dims),
        "state": _interleave(q.state).reshape(-1).tolist(),
        "measurements": [
            _interleave(m).reshape(m.shape[0], m.shape[1], m.shape[2], -1).tolist()
            for m in q.measurements
        ],
    }


def strategy_from_dict(data: dict) -> QuantumStrategy:
    try:
        dims = tuple(int(d) for d in data["dims"])
        raw_state = np.asarray(data["state"], dtype=np.float64).reshape(-1, 2)
        measurements = []
        for party, raw in enumerate(data["measurements"]):
            array = np.asarray(raw, dtype=np.float64)
            array = array.reshape(array.shape[0], array.shape[1], dims[party], dims[party], 2)
            measurements.append(array[..., 0] + 1j * array[..., 1])
    except (KeyError, ValueError, IndexError) as e:
        raise SpecInvalid(f"Malformed quantum strategy: {e}") from e
    return QuantumStrategy(dims, raw_state[:, 0] + 1j * raw_state[:, 1], tuple(measurements))


def load_strategy(path: Union[str, Path]) -> QuantumStrategy:
    return strategy_from_dict(json.loads(Path(path).read_text()))


def dump_strategy(q: QuantumStrategy, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(strategy_to_dict(q)) + "\n")


# --- known strategies ---


def _basis_projectors(vectors: Sequence[np.ndarray]) -> np.ndarray:
    return np.array([np.outer(v, v.conj()) for v in vectors])


def _xz_plane_measurement(angle: float) -> np.ndarray:
    """Output 0 projects on cos(a)|0> + sin(a)|1>, output 1 on the orthogonal vector."""
    first = np.array([math.cos(angle), math.sin(angle)], dtype=np.complex128)
    second = np.array([-math.sin(angle), math.cos(angle)], dtype=np.complex128)
    return _basis_projectors([first, second])


def maximally_entangled_pair() -> np.ndarray:
    """(|00> + |11>) / sqrt(2)."""
    return np.array([1, 0, 0, 1], dtype=np.complex128) / math.sqrt(2)


def chsh_optimal_strategy() -> QuantumStrategy:
    """
    The CHSH-optimal strategy: the maximally entangled pair, party 0 measuring at
    angles 0 and pi/4, party 1 at pi/8 and -pi/8 in the X-Z plane.
    """
    party0 = np.array([_xz_plane_measurement(0.0), _xz_plane_measurement(math.pi / 4)])
    party1 = np.array([_xz_plane_measurement(math.pi / 8), _xz_plane_measurement(-math.pi / 8)])
    return QuantumStrategy((2, 2), maximally_entangled_pair(), (party0, party1))


def ghz_optimal_strategy() -> QuantumStrategy:
    """
    The perfect GHZ strategy: (|000> + |111>) / sqrt(2), input 0 measures X, input 1
    measures Y, and the output is 0 for eigenvalue +1.
    """
    state = np.zeros(8, dtype=np.complex128)
    state[0] = state[7] = 1 / math.sqrt(2)
    s = 1 / math.sqrt(2)
    x_basis = _basis_projectors([np.array([s, s]), np.array([s, -s])])
    y_basis = _basis_projectors([np.array([s, 1j * s]), np.array([s, -1j * s])])
    measurements = np.array([x_basis, y_basis])
    return QuantumStrategy((2, 2, 2), state, (measurements, measurements, measurements))


@dataclass(frozen=True)
class BellViolation:
    gap: float
    violated: bool


def bell_violation(c_star: float, q_value: float, tol: float = 1e-9) -> BellViolation:
    """
    Quantum advantage of a quantum value over the classical value.

    Args:
        c_star: Classical value
        q_value: Value reached by a quantum strategy
        tol: Gap below which no violation is claimed

    Returns:
        BellViolation: q - c* and whether it exceeds `tol`
    """
    gap = q_value - c_star
    return BellViolation(gap=gap, violated=gap > tol)
