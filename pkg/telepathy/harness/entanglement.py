"""
Entanglement simulator.

Stands in for a shared quantum state: parties query with their own input only, and each
answer is drawn from the behavior conditioned on the outcomes already fixed in the same
round. The first party to query samples from its marginal. This is exact for any query
order as long as the behavior is no-signaling, which is checked when the session is
created.
"""

import logging
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from telepathy.game.core import no_signaling_check
from telepathy.models.errors import (
    DomainMismatch,
    DuplicateQuery,
    NumericalDrift,
    SignalingBehavior,
    UnknownRound,
)
from telepathy.models.models import Behavior, ValidatedGame

logger = logging.getLogger("telepathy.harness.entanglement")

NO_SIGNALING_TOL = 1e-9


class EntanglementSession:
    """
    Per-run sampler for a no-signaling behavior.

    Each open round memoizes the (input, output) pair fixed for every party that has
    queried. Outcomes are never resampled.
    """

    def __init__(
        self,
        behavior: Behavior,
        seed: int = 0,
        rng: Optional[np.random.Generator] = None,
        inputs: Optional[Sequence[Sequence[str]]] = None,
        outputs: Optional[Sequence[Sequence[str]]] = None,
    ):
        """
        Args:
            behavior: Behavior to reproduce
            seed: Seed used when no generator is given
            rng: Shared random generator, overrides `seed`
            inputs: Input labels per party, defaults to the indices as strings
            outputs: Output labels per party, defaults to the indices as strings
        """
        self.logger = logging.getLogger("telepathy.harness.entanglement")
        report = no_signaling_check(behavior, tol=NO_SIGNALING_TOL)
        if not report.passed:
            raise SignalingBehavior(
                f"Behavior signals: marginal discrepancy {report.max_violation:.3e} "
                f"exceeds {NO_SIGNALING_TOL:g}",
                report.max_violation,
            )
        self.behavior = behavior
        self.rng = rng if rng is not None else np.random.default_rng(seed)
        self.tensor = behavior.table.reshape(behavior.input_sizes + behavior.output_sizes)
        self.inputs = [
            list(labels) for labels in (inputs or [[str(k) for k in range(s)] for s in behavior.input_sizes])
        ]
        self.outputs = [
            list(labels) for labels in (outputs or [[str(k) for k in range(s)] for s in behavior.output_sizes])
        ]
        self.rounds: Dict[int, Dict[int, Tuple[int, int]]] = {}

    @classmethod
    def for_game(
        cls,
        game: ValidatedGame,
        behavior: Behavior,
        seed: int = 0,
        rng: Optional[np.random.Generator] = None,
    ) -> "EntanglementSession":
        return cls(behavior, seed=seed, rng=rng, inputs=game.inputs, outputs=game.outputs)

    @property
    def n_parties(self) -> int:
        return self.behavior.n_parties

    def open_round(self, round_id: int) -> None:
        self.rounds[round_id] = {}

    def close_round(self, round_id: int) -> None:
        self.rounds.pop(round_id, None)

    def conditional(self, round_id: int, party: int, input_index: int) -> np.ndarray:
        """
        Distribution of `party`'s output given its input and the outcomes already fixed
        in the round.
        """
        if round_id not in self.rounds:
            raise UnknownRound(f"Round {round_id} is not open")
        fixed = self.rounds[round_id]
        n = self.n_parties
        # Unqueried parties get input 0; no-signaling makes the choice irrelevant
        index = [0] * n
        for k, (i_k, _) in fixed.items():
            index[k] = i_k
        index[party] = input_index
        rows = self.tensor[tuple(index)]
        for k in range(n - 1, -1, -1):
            if k == party:
                continue
            if k in fixed:
                rows = np.take(rows, fixed[k][1], axis=k)
            else:
                rows = rows.sum(axis=k)
        weights = np.clip(rows, 0.0, None)
        total = weights.sum()
        if total <= 0:
            raise NumericalDrift(
                f"Round {round_id}: fixed outcomes have probability zero for party {party}"
            )
        return weights / total

    def query(self, round_id: int, party: int, input_index: int) -> int:
        """
        Sample (or return) party's output index for a round.

        Args:
            round_id: Open round
            party: Querying party
            input_index: Party's input index

        Returns:
            int: Output index
        """
        if round_id not in self.rounds:
            raise UnknownRound(f"Round {round_id} is not open")
        if not 0 <= party < self.n_parties:
            raise DomainMismatch(f"Party {party} outside 0..{self.n_parties - 1}")
        if not 0 <= input_index < self.behavior.input_sizes[party]:
            raise DomainMismatch(f"Party {party} has no input index {input_index}")
        if party in self.rounds[round_id]:
            raise DuplicateQuery(f"Party {party} already queried in round {round_id}")

        probabilities = self.conditional(round_id, party, input_index)
        cdf = np.cumsum(probabilities)
        output = int(np.searchsorted(cdf, self.rng.random() * cdf[-1], side="right"))
        output = min(output, len(probabilities) - 1)
        self.rounds[round_id][party] = (input_index, output)
        return output


def entanglement_query(
    session: EntanglementSession, round_id: int, party: int, input_label: str
) -> str:
    """
    Label-level query: the party's output label given its input label.

    Args:
        session: Session hosting the shared behavior
        round_id: Open round
        party: Querying party
        input_label: Party's input label

    Returns:
        str: Output label
    """
    try:
        input_index = session.inputs[party].index(input_label)
    except (IndexError, ValueError) as e:
        raise DomainMismatch(f"Party {party} has no input '{input_label}'") from e
    return session.outputs[party][session.query(round_id, party, input_index)]
