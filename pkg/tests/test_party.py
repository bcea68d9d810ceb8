import pytest
from pydantic import ValidationError

from telepathy.harness.party import (
    DeterministicParty,
    EntangledParty,
    RelayParty,
    deterministic_party_files,
    dump_party_files,
    entangled_party_files,
    lc_witness_party_files,
    load_party_strategy,
    strategy_from_dict,
)
from telepathy.harness.protocol import EQuery, Output, Peer
from telepathy.models.errors import SpecInvalid
from telepathy.models.models import CommGraph
from telepathy.solver.classical import classical_value, lc_classical_value


def test_deterministic_party():
    party = DeterministicParty(0, {"0": "1", "1": "0"})
    assert party.on_input(4, "1") == [Output(round=4, output="0")]
    assert party.on_input(4, "9") == []


def test_relay_party_waits_for_its_view():
    party = RelayParty(1, forward_to=[0], view=[0, 1], table={"0,1": "1"}, fallback={"1": "0"})
    assert party.on_input(0, "1") == [Peer(round=0, to=0, payload="1")]
    assert party.on_peer(0, 0, "0") == [Output(round=0, output="1")]


def test_relay_party_falls_back_at_the_deadline():
    party = RelayParty(1, forward_to=[], view=[0, 1], table={}, fallback={"1": "0"})
    assert party.on_input(0, "1") == []
    assert party.on_deadline(0) == [Output(round=0, output="0")]
    party.end_round(0)
    assert party.on_deadline(0) == []


def test_relay_party_must_see_itself():
    with pytest.raises(SpecInvalid):
        RelayParty(1, forward_to=[], view=[0], table={}, fallback={})


def test_entangled_party():
    party = EntangledParty(0)
    assert party.on_input(2, "1") == [EQuery(round=2, input="1")]
    assert party.on_answer(2, "0") == [Output(round=2, output="0")]


def test_lc_witness_files(chsh_game):
    one_way = CommGraph.empty(2).with_edge(0, 1)
    witness = lc_classical_value(chsh_game, one_way).witness
    files = lc_witness_party_files(chsh_game, witness, classical_value(chsh_game).witness)
    assert files[0]["forward_to"] == [1]
    assert files[0]["view"] == [0]
    assert files[1]["forward_to"] == []
    assert files[1]["view"] == [0, 1]
    assert set(files[1]["fallback"]) == {"0", "1"}


def test_party_files_round_trip(tmp_path, chsh_game):
    files = deterministic_party_files(chsh_game, classical_value(chsh_game).witness)
    paths = dump_party_files(files, tmp_path / "chsh")
    assert [p.name for p in paths] == ["chsh.party0.json", "chsh.party1.json"]
    party = load_party_strategy(paths[1])
    assert isinstance(party, DeterministicParty)
    assert party.party == 1
    assert isinstance(strategy_from_dict(entangled_party_files(2)[1]), EntangledParty)


def test_unknown_strategy_kind():
    with pytest.raises(ValidationError):
        strategy_from_dict({"kind": "psychic", "party": 0})
