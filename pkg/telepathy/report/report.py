"""
Run reports for Telepathy.

A RunReport ties every printed value to the command that produced it, the seed and a
digest of the game, so any value can be recomputed later.
"""

import csv
import io
import json
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from cryptography.hazmat.primitives import hashes

from telepathy import __version__
from telepathy.game.core import game_to_dict
from telepathy.models.errors import SpecInvalid
from telepathy.models.models import ValidatedGame


def game_digest(game: ValidatedGame) -> str:
    """
    SHA-256 of the canonical JSON form of a game.

    Args:
        game: Game

    Returns:
        str: Hex digest
    """
    canonical = json.dumps(game_to_dict(game), sort_keys=True, separators=(",", ":"))
    digest = hashes.Hash(hashes.SHA256())
    digest.update(canonical.encode())
    return digest.finalize().hex()


@dataclass
class RunReport:
    """Values computed by one CLI command."""

    command: str
    game_digest: str
    seed: Optional[int] = None
    parameters: Dict[str, Any] = field(default_factory=dict)
    values: Dict[str, Any] = field(default_factory=dict)
    stats: Dict[str, Any] = field(default_factory=dict)
    timing: Dict[str, float] = field(default_factory=dict)
    session: Optional[dict] = None

    def to_dict(self) -> dict:
        data = {
            "command": self.command,
            "game_digest": self.game_digest,
            "seed": self.seed,
            "parameters": self.parameters,
            "values": self.values,
            "stats": self.stats,
            "timing": self.timing,
            "version": __version__,
            "python": platform.python_version(),
        }
        if self.session is not None:
            data["session"] = self.session
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def dump(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_json() + "\n")


def load_report(path: Union[str, Path]) -> dict:
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise SpecInvalid(f"{path} is not a JSON report")
    return data


def _rounds(report: dict) -> List[dict]:
    session = report.get("session", report)
    rounds = session.get("rounds")
    if rounds is None:
        raise SpecInvalid("Report has no round records")
    return rounds


def rounds_to_csv(report: dict) -> str:
    """
    Round records as CSV: round_id, input_0.., output_0.., utility, flags.

    Args:
        report: RunReport or SessionReport dictionary

    Returns:
        str: CSV text
    """
    rounds = _rounds(report)
    n_parties = len(rounds[0]["inputs"]) if rounds else 0
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(
        ["round_id"]
        + [f"input_{j}" for j in range(n_parties)]
        + [f"output_{j}" for j in range(n_parties)]
        + ["utility", "flags"]
    )
    for record in rounds:
        outputs = ["" if o is None else o for o in record["outputs"]]
        writer.writerow(
            [record["round_id"]]
            + list(record["inputs"])
            + outputs
            + [repr(float(record["utility"])), ";".join(record["flags"])]
        )
    return buffer.getvalue()


def render_report(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, sort_keys=True, indent=2)
    if fmt == "csv":
        return rounds_to_csv(report)
    raise SpecInvalid(f"Unknown report format '{fmt}', expected json or csv")
