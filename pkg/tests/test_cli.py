import json
import math

import pytest

from telepathy.cli import cli_dispatch
from telepathy.game.core import behavior_to_dict, game_to_dict
from telepathy.latency.model import dump_scenario, exchange_pair_scenario


@pytest.fixture(autouse=True)
def isolated_directory(tmp_path, monkeypatch):
    # Keep any telepathy.yaml in the working directory out of the tests
    monkeypatch.chdir(tmp_path)


def stdout_lines(capsys):
    return capsys.readouterr().out.strip().splitlines()


def test_classical_value_of_catalog_chsh(tmp_path, capsys):
    game = tmp_path / "chsh.json"
    assert cli_dispatch(["catalog", "chsh", "--out", str(game)]) == 0
    report = tmp_path / "report.json"
    assert cli_dispatch(["classical-value", str(game), "--report-out", str(report)]) == 0
    assert stdout_lines(capsys) == ["0.75"]
    data = json.loads(report.read_text())
    assert data["command"] == "classical-value"
    assert data["values"]["strategy_space_size"] == 16
    assert len(data["game_digest"]) == 64


def test_lc_value_from_a_scenario(tmp_path, capsys, chsh_file):
    scenario = tmp_path / "scenario.json"
    dump_scenario(exchange_pair_scenario(deadline_s=200e-6), scenario)
    prefix = tmp_path / "relay"
    code = cli_dispatch(
        [
            "classical-value",
            str(chsh_file),
            "--scenario",
            str(scenario),
            "--party-strategies-out",
            str(prefix),
        ]
    )
    assert code == 0
    assert stdout_lines(capsys) == ["1"]
    party = json.loads((tmp_path / "relay.party1.json").read_text())
    assert party["kind"] == "relay"


def test_known_quantum_strategy(capsys, chsh_file):
    assert cli_dispatch(["quantum-value", str(chsh_file), "--known", "chsh"]) == 0
    lines = stdout_lines(capsys)
    assert float(lines[0]) == pytest.approx((2 + math.sqrt(2)) / 4, abs=1e-11)
    assert lines[1].startswith("advantage")


def test_seesaw_from_the_command_line(tmp_path, capsys, chsh_file):
    behavior = tmp_path / "behavior.json"
    code = cli_dispatch(
        [
            "quantum-value",
            str(chsh_file),
            "--dims",
            "2,2",
            "--restarts",
            "2",
            "--seed",
            "4",
            "--behavior-out",
            str(behavior),
        ]
    )
    assert code == 0
    assert float(stdout_lines(capsys)[0]) > 0.75
    assert cli_dispatch(["simulate", str(chsh_file), "--behavior", str(behavior), "-n", "2000"]) == 0
    mean, std_err = map(float, stdout_lines(capsys)[0].split())
    assert mean > 0.7 and std_err > 0


def test_validate_with_behavior(capsys, chsh_file, write_json, pr_box):
    behavior = write_json("pr.json", behavior_to_dict(pr_box))
    assert cli_dispatch(["validate", str(chsh_file), "--behavior", str(behavior)]) == 0
    out = capsys.readouterr().out
    assert "no-signaling pass" in out
    assert "average utility 1" in out


@pytest.mark.parametrize(
    "document",
    [
        {"parties": 2, "inputs": [["0"], ["0"]], "outputs": [["0"], ["0"]], "pi": [0.9], "utility": [1]},
        {"parties": 2, "inputs": [["0", "0"], ["0"]], "outputs": [["0"], ["0"]], "pi": [0.5, 0.5], "utility": [1, 1]},
        {"parties": 1, "inputs": [[]], "outputs": [["0"]], "pi": [], "utility": []},
        {"parties": 1, "inputs": [["0"]], "outputs": [["0"]], "pi": [1.0]},
        {"parties": 1, "inputs": [["0"]], "outputs": [["0"]], "pi": [-1.0, 2.0], "utility": [0]},
    ],
)
def test_invalid_games_exit_2(write_json, document):
    assert cli_dispatch(["validate", str(write_json("game.json", document))]) == 2


def test_valid_game_exits_0(write_json, chsh_game):
    assert cli_dispatch(["validate", str(write_json("game.json", game_to_dict(chsh_game)))]) == 0


def test_unreadable_inputs_exit_2(tmp_path):
    broken = tmp_path / "broken.json"
    broken.write_text("{\"parties\": 2,")
    assert cli_dispatch(["validate", str(broken)]) == 2
    assert cli_dispatch(["validate", str(tmp_path / "missing.json")]) == 2


def test_budget_exceeded_exits_3(tmp_path):
    game = tmp_path / "magic.json"
    assert cli_dispatch(["catalog", "magic-square", "--out", str(game)]) == 0
    assert cli_dispatch(["classical-value", str(game), "--budget", "100"]) == 3


def test_dimension_cap_exits_3(tmp_path, chsh_file):
    config = tmp_path / "telepathy.yaml"
    config.write_text("seesaw:\n  dimension_cap: 8\n")
    assert cli_dispatch(["--config", str(config), "quantum-value", str(chsh_file), "--dims", "4,4"]) == 3


def test_malformed_config_exits_2(tmp_path, chsh_file, capsys):
    config = tmp_path / "telepathy.yaml"
    config.write_text("solver: [budget: 10\n")
    assert cli_dispatch(["--config", str(config), "classical-value", str(chsh_file)]) == 2
    assert "invalid configuration" in capsys.readouterr().err


def test_load_balancing_catalog(capsys):
    args = ["catalog", "load-balancing", "--rates", "1,2", "--r-star", "3.5", "--channels", "2"]
    assert cli_dispatch(args) == 0
    game = json.loads(capsys.readouterr().out)
    assert game["inputs"] == [["1", "2"], ["1", "2"]]


def test_report_rendering(tmp_path, capsys, write_json):
    session = {
        "rounds": [
            {"round_id": 0, "inputs": ["0", "1"], "outputs": ["1", None], "utility": 0.0, "flags": ["missing"]},
            {"round_id": 1, "inputs": ["1", "1"], "outputs": ["0", "1"], "utility": 1.0, "flags": []},
        ]
    }
    report = write_json("report.json", {"command": "referee", "session": session})
    assert cli_dispatch(["report", str(report), "--format", "csv"]) == 0
    assert stdout_lines(capsys) == [
        "round_id,input_0,input_1,output_0,output_1,utility,flags",
        "0,0,1,1,,0.0,missing",
        "1,1,1,0,1,1.0,",
    ]
