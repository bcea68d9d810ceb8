import numpy as np
import pytest
from scipy.stats import chisquare

from telepathy.harness.entanglement import EntanglementSession, entanglement_query
from telepathy.models.errors import DomainMismatch, DuplicateQuery, SignalingBehavior, UnknownRound
from telepathy.models.models import Behavior

SAMPLES_PER_INPUT = 20_000


@pytest.mark.parametrize("x, y", [(0, 0), (0, 1), (1, 0), (1, 1)])
def test_joint_outcomes_follow_the_behavior(chsh_quantum_behavior, x, y):
    session = EntanglementSession(chsh_quantum_behavior, seed=100 + 2 * x + y)
    counts = np.zeros(4)
    for round_id in range(SAMPLES_PER_INPUT):
        session.open_round(round_id)
        # Alternate the query order; the joint distribution must not depend on it
        if round_id % 2:
            b = session.query(round_id, 1, y)
            a = session.query(round_id, 0, x)
        else:
            a = session.query(round_id, 0, x)
            b = session.query(round_id, 1, y)
        session.close_round(round_id)
        counts[a * 2 + b] += 1
    expected = SAMPLES_PER_INPUT * chsh_quantum_behavior.table[x * 2 + y]
    assert chisquare(counts, expected).pvalue > 0.001


def test_pr_box_correlations(pr_box):
    session = EntanglementSession(pr_box, seed=3)
    for round_id in range(200):
        x, y = round_id % 2, (round_id // 2) % 2
        session.open_round(round_id)
        a = session.query(round_id, 0, x)
        b = session.query(round_id, 1, y)
        assert a ^ b == x & y


def test_signaling_behavior_is_rejected():
    table = np.zeros((4, 4))
    for x in range(2):
        for y in range(2):
            table[x * 2 + y, x] = 1.0
    with pytest.raises(SignalingBehavior) as info:
        EntanglementSession(Behavior((2, 2), (2, 2), table))
    assert info.value.max_violation == pytest.approx(1.0)


def test_query_errors(pr_box):
    session = EntanglementSession(pr_box)
    with pytest.raises(UnknownRound):
        session.query(0, 0, 0)
    session.open_round(0)
    session.query(0, 0, 1)
    with pytest.raises(DuplicateQuery):
        session.query(0, 0, 1)
    with pytest.raises(DomainMismatch):
        session.query(0, 1, 2)
    with pytest.raises(DomainMismatch):
        session.query(0, 2, 0)


def test_label_queries(chsh_game, pr_box):
    session = EntanglementSession.for_game(chsh_game, pr_box, seed=5)
    session.open_round(0)
    a = entanglement_query(session, 0, 0, "1")
    b = entanglement_query(session, 0, 1, "1")
    assert a != b
    with pytest.raises(DomainMismatch):
        entanglement_query(session, 0, 1, "2")
