"""
Game catalog.

Constructors for the concrete games: CHSH and its trading reading, GHZ, the magic
square, load balancing over shared channels, and rendezvous on graphs (see
rendezvous.py). The GHZ and magic-square rules are the standard constructions from the
nonlocal-games literature.
"""

import itertools
import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from telepathy.catalog.binpacking import CAPACITY_TOL, min_channels
from telepathy.catalog.rendezvous import corner_square_spec, rendezvous
from telepathy.game.core import build_game
from telepathy.game.indexing import index_grid, strides
from telepathy.models.errors import OutputSetTooLarge, SpecInvalid
from telepathy.models.models import ValidatedGame

logger = logging.getLogger("telepathy.catalog.games")

BITS = ["0", "1"]

# Largest joint output set a load-balancing game may use
MAX_JOINT_OUTPUTS = 1_000_000


def _table(
    input_sizes: Sequence[int],
    output_sizes: Sequence[int],
    rule: Callable[[Tuple[int, ...], Tuple[int, ...]], bool],
) -> np.ndarray:
    input_grid = index_grid(input_sizes)
    output_grid = index_grid(output_sizes)
    utility = np.zeros((len(input_grid), len(output_grid)))
    for row, joint_input in enumerate(input_grid):
        for column, joint_output in enumerate(output_grid):
            if rule(tuple(joint_input), tuple(joint_output)):
                utility[row, column] = 1.0
    return utility


def _chsh_rule(i: Tuple[int, ...], o: Tuple[int, ...]) -> bool:
    return (o[0] == o[1]) != (i[0] == 1 and i[1] == 1)


def chsh() -> ValidatedGame:
    """Win iff the outputs agree, except on inputs (1, 1) where they must differ."""
    return build_game(
        [BITS, BITS], [BITS, BITS], np.full(4, 0.25), _table((2, 2), (2, 2), _chsh_rule)
    )


def hft_hedging() -> ValidatedGame:
    """
    CHSH for two trading servers hedging correlated assets.

    Each server sees whether the asset correlation flipped sign in its market. With an
    initially negative correlation the servers should issue the same orders, unless both
    saw the flip signal.
    """
    return build_game(
        [["no-flip", "flip"], ["no-flip", "flip"]],
        [["buy", "sell"], ["buy", "sell"]],
        np.full(4, 0.25),
        _table((2, 2), (2, 2), _chsh_rule),
    )


def ghz() -> ValidatedGame:
    """
    Three parties, inputs drawn uniformly from 000, 011, 101 and 110. Win iff the XOR of
    the outputs equals the OR of the inputs.
    """
    pi = np.zeros(8)
    for bits in ((0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0)):
        pi[bits[0] * 4 + bits[1] * 2 + bits[2]] = 0.25

    def rule(i, o):
        return (o[0] ^ o[1] ^ o[2]) == (i[0] | i[1] | i[2])

    return build_game([BITS] * 3, [BITS] * 3, pi, _table((2, 2, 2), (2, 2, 2), rule))


def magic_square() -> ValidatedGame:
    """
    Party 0 gets a row, party 1 a column of a 3x3 grid. Each answers three bits for the
    cells of its line (label "b0b1b2"). Rows need even parity, columns odd parity, and
    the shared cell must agree.
    """
    labels = [format(k, "03b") for k in range(8)]
    bits = [[int(c) for c in label] for label in labels]

    def rule(i, o):
        row, column = i
        row_bits, column_bits = bits[o[0]], bits[o[1]]
        return (
            sum(row_bits) % 2 == 0
            and sum(column_bits) % 2 == 1
            and row_bits[column] == column_bits[row]
        )

    lines = ["0", "1", "2"]
    return build_game(
        [lines, lines], [labels, labels], np.full(9, 1 / 9), _table((3, 3), (8, 8), rule)
    )


# --- load balancing ---


class LoadBalancingSpec(BaseModel):
    """
    Transmitters pick a channel each. `pi` is over joint rates in JointIndex order and
    defaults to uniform.
    """

    rates_per_transmitter: List[List[float]] = Field(min_length=1)
    r_star: float = Field(gt=0)
    n_channels: int = Field(ge=1)
    pi: Optional[List[float]] = None

    @model_validator(mode="after")
    def _check_rates(self) -> "LoadBalancingSpec":
        for party, rates in enumerate(self.rates_per_transmitter):
            if not rates:
                raise ValueError(f"transmitter {party} has no rates")
            if any(not math.isfinite(r) or r <= 0 for r in rates):
                raise ValueError(f"transmitter {party} rates must be positive and finite")
        return self


def _rate_label(rate: float) -> str:
    return f"{rate:g}"


def load_balancing(spec: LoadBalancingSpec) -> ValidatedGame:
    """
    Build the load-balancing game.

    Utility is 1 iff no channel carries more than r_star and the number of channels in
    use equals the minimum needed for the joint rates. Joint rates that cannot be packed
    at all score 0 for every output.

    Args:
        spec: Rates per transmitter, threshold, channel count and input distribution

    Returns:
        ValidatedGame: Game with rates as inputs and channel indices as outputs
    """
    n = len(spec.rates_per_transmitter)
    inputs = [[_rate_label(r) for r in rates] for rates in spec.rates_per_transmitter]
    for party, labels in enumerate(inputs):
        if len(set(labels)) != len(labels):
            raise SpecInvalid(f"Transmitter {party} has duplicate rates {labels}")
    n_joint_outputs = spec.n_channels**n
    if n_joint_outputs > MAX_JOINT_OUTPUTS:
        raise OutputSetTooLarge(
            f"{spec.n_channels} channels for {n} transmitters gives {n_joint_outputs} "
            f"joint outputs, cap is {MAX_JOINT_OUTPUTS}"
        )

    input_sizes = [len(rates) for rates in spec.rates_per_transmitter]
    n_joint_inputs = math.prod(input_sizes)
    if spec.pi is None:
        pi = np.full(n_joint_inputs, 1.0 / n_joint_inputs)
    else:
        pi = np.asarray(spec.pi, dtype=np.float64)

    channels = index_grid([spec.n_channels] * n)
    limit = spec.r_star + CAPACITY_TOL * max(1.0, spec.r_star)
    utility = np.zeros((n_joint_inputs, n_joint_outputs))
    for row, joint_input in enumerate(index_grid(input_sizes)):
        rates = np.array(
            [spec.rates_per_transmitter[j][k] for j, k in enumerate(joint_input)]
        )
        needed = min_channels(rates.tolist(), spec.r_star)
        if needed is None:
            continue
        # loads[o, c] = total rate on channel c under joint output o
        loads = np.zeros((n_joint_outputs, spec.n_channels))
        for j in range(n):
            np.add.at(loads, (np.arange(n_joint_outputs), channels[:, j]), rates[j])
        within = (loads <= limit).all(axis=1)
        used = (loads > 0).sum(axis=1)
        utility[row] = (within & (used == needed)).astype(np.float64)

    logger.debug(
        f"Load-balancing game: {n} transmitters, {spec.n_channels} channels, "
        f"threshold {spec.r_star:g}"
    )
    return build_game(inputs, [[str(c) for c in range(spec.n_channels)]] * n, pi, utility)


# --- isomorphism ---


def find_output_relabeling(
    a: ValidatedGame, b: ValidatedGame, atol: float = 1e-12
) -> Optional[Tuple[Tuple[int, ...], ...]]:
    """
    Search per-party output permutations that turn game a into game b, inputs fixed.

    Args:
        a: First game
        b: Second game
        atol: Entry-wise tolerance for the table comparison

    Returns:
        Optional[Tuple[Tuple[int, ...], ...]]: perm[j][o] is the output of b matching
        output o of a for party j, or None when no relabeling exists
    """
    if a.input_sizes != b.input_sizes or a.output_sizes != b.output_sizes:
        return None
    if not np.allclose(a.pi, b.pi, rtol=0.0, atol=atol):
        return None
    grid = index_grid(a.output_sizes)
    b_strides = strides(b.output_sizes)
    per_party = [itertools.permutations(range(size)) for size in a.output_sizes]
    for perms in itertools.product(*per_party):
        mapped = np.zeros(len(grid), dtype=np.int64)
        for j, perm in enumerate(perms):
            mapped += np.asarray(perm, dtype=np.int64)[grid[:, j]] * b_strides[j]
        if np.allclose(a.utility, b.utility[:, mapped], rtol=0.0, atol=atol):
            return tuple(tuple(p) for p in perms)
    return None


# Parameterless games by CLI name
PRESETS: Dict[str, Callable[[], ValidatedGame]] = {
    "chsh": chsh,
    "hft-hedging": hft_hedging,
    "ghz": ghz,
    "magic-square": magic_square,
    "corner-square": lambda: rendezvous(corner_square_spec()),
}
