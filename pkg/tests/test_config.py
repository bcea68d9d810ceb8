import pytest
from pydantic import ValidationError

from telepathy.config.config import Config, parse_address
from telepathy.models.errors import SpecInvalid


def test_defaults_without_a_file(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    config = Config.from_yaml()
    assert config.budget == 100_000_000
    assert config.clock == "logical"
    assert config.late_policy == "zero"
    assert config.listen_address() == ("127.0.0.1", 7643)


def test_nested_sections_and_env_substitution(tmp_path, monkeypatch):
    monkeypatch.setenv("TELEPATHY_PORT", "9000")
    path = tmp_path / "telepathy.yaml"
    path.write_text(
        "solver:\n"
        "  budget: 1000\n"
        "seesaw:\n"
        "  restarts: 2\n"
        "harness:\n"
        "  late_policy: abort\n"
        "  listen: \"0.0.0.0:${TELEPATHY_PORT}\"\n"
        "  response_timeout: \"${TELEPATHY_TIMEOUT:-250ms}\"\n"
        "logging:\n"
        "  level: debug\n"
    )
    config = Config.from_yaml(path)
    assert config.budget == 1000
    assert config.seesaw_restarts == 2
    assert config.late_policy == "abort"
    assert config.listen_address() == ("0.0.0.0", 9000)
    assert Config.parse_duration(config.response_timeout) == pytest.approx(0.25)
    assert config.log_level == "debug"


def test_invalid_values_are_rejected(tmp_path):
    path = tmp_path / "telepathy.yaml"
    path.write_text("harness:\n  clock: sundial\n")
    with pytest.raises(ValidationError):
        Config.from_yaml(path)


@pytest.mark.parametrize(
    "text, seconds",
    [("188us", 188e-6), ("188µs", 188e-6), ("1.5s", 1.5), ("2m", 120.0), ("10ns", 1e-8)],
)
def test_parse_duration(text, seconds):
    assert Config.parse_duration(text) == pytest.approx(seconds)


def test_parse_duration_falls_back():
    assert Config.parse_duration("soon", default=3.0) == 3.0
    assert Config.parse_duration("", default=3.0) == 3.0


@pytest.mark.parametrize("address", ["localhost", "host:http", "host:70000"])
def test_bad_addresses(address):
    with pytest.raises(SpecInvalid):
        parse_address(address)


def test_address_without_host():
    assert parse_address(":0") == ("127.0.0.1", 0)
