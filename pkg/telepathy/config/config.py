"""
Configuration module for Telepathy.
"""

import logging
import os
import re
from pathlib import Path
from typing import Literal, Optional, Tuple, Union

import yaml
from pydantic import BaseModel

from telepathy.models.errors import SpecInvalid

logger = logging.getLogger("telepathy.config")

# Seconds per duration unit
_DURATION_UNITS = {
    "ns": 1e-9,
    "us": 1e-6,
    "µs": 1e-6,
    "ms": 1e-3,
    "s": 1.0,
    "m": 60.0,
    "h": 60.0 * 60.0,
}


class Config(BaseModel):
    """Configuration for Telepathy."""

    # Classical solver configuration
    budget: int = 100_000_000
    solver_workers: int = 1
    chunk_size: int = 65536

    # Seesaw configuration
    seesaw_max_iters: int = 200
    seesaw_restarts: int = 5
    seesaw_seed: int = 0
    seesaw_convergence_eps: float = 1e-10
    seesaw_workers: int = 1
    dimension_cap: int = 4096

    # Harness configuration
    clock: Literal["logical", "wall"] = "logical"
    late_policy: Literal["zero", "accept", "abort"] = "zero"
    response_timeout: str = "10s"
    listen: str = "127.0.0.1:7643"

    # Logging configuration
    log_level: str = "info"

    @classmethod
    def from_yaml(cls, config_path: Optional[Union[str, Path]] = None) -> "Config":
        """
        Load configuration from a YAML file.

        Args:
            config_path: Path to the YAML configuration file

        Returns:
            Config: Config instance populated with values from the YAML file
        """
        default_paths = [
            Path("./telepathy.yaml"),
            Path("./telepathy.yml"),
            Path("/etc/telepathy/telepathy.yaml"),
        ]

        paths = [Path(config_path)] if config_path else default_paths

        config_data = {}
        for path in paths:
            if path.exists():
                with open(path, "r") as f:
                    yaml_content = cls._substitute_env_vars(f.read())
                    config_data = yaml.safe_load(yaml_content) or {}
                logger.debug(f"Loaded configuration from {path}")
                break

        return cls(**cls._flatten_config(config_data))

    @staticmethod
    def _substitute_env_vars(content: str) -> str:
        """
        Substitute environment variables in the configuration content.

        Args:
            content: Configuration content

        Returns:
            str: Configuration content with environment variables substituted
        """
        # Pattern for ${ENV_VAR} or ${ENV_VAR:-default}
        pattern = r"\${([^}]+)}"

        def replace_env_var(match):
            env_var = match.group(1)
            if ":-" in env_var:
                env_var, default = env_var.split(":-", 1)
                return os.environ.get(env_var, default)
            return os.environ.get(env_var, "")

        return re.sub(pattern, replace_env_var, content)

    @staticmethod
    def _flatten_config(config_data: dict) -> dict:
        """
        Flatten nested configuration, keeping only keys that were set.

        Args:
            config_data: Nested configuration data

        Returns:
            dict: Flattened configuration data
        """
        sections = {
            "solver": {"budget": "budget", "workers": "solver_workers", "chunk_size": "chunk_size"},
            "seesaw": {
                "max_iters": "seesaw_max_iters",
                "restarts": "seesaw_restarts",
                "seed": "seesaw_seed",
                "convergence_eps": "seesaw_convergence_eps",
                "workers": "seesaw_workers",
                "dimension_cap": "dimension_cap",
            },
            "harness": {
                "clock": "clock",
                "late_policy": "late_policy",
                "response_timeout": "response_timeout",
                "listen": "listen",
            },
            "logging": {"level": "log_level"},
        }

        flat_config = {}
        for section, keys in sections.items():
            values = config_data.get(section) or {}
            for key, field_name in keys.items():
                if key in values and values[key] is not None:
                    flat_config[field_name] = values[key]
        return flat_config

    @staticmethod
    def parse_duration(duration_str: str, default: float = 10.0) -> float:
        """
        Parse a duration string like '188us' or '1.5s' into seconds.

        Args:
            duration_str: Duration string
            default: Value returned when the string is empty or malformed

        Returns:
            float: Duration in seconds
        """
        if not duration_str:
            return default

        match = re.match(r"^\s*(\d+(?:\.\d*)?(?:[eE][-+]?\d+)?)\s*(ns|us|µs|ms|s|m|h)\s*$", duration_str)
        if not match:
            logger.warning(f"Could not parse duration '{duration_str}', using {default}s")
            return default

        value, unit = match.groups()
        return float(value) * _DURATION_UNITS[unit]

    def listen_address(self) -> Tuple[str, int]:
        """Split `listen` into host and port."""
        return parse_address(self.listen)


def parse_address(address: str) -> Tuple[str, int]:
    """
    Parse 'host:port' into a tuple.

    Args:
        address: Address string

    Returns:
        Tuple[str, int]: Host and port
    """
    host, _, port = address.rpartition(":")
    if not port.isdigit() or not 0 <= int(port) <= 65535:
        raise SpecInvalid(f"Invalid address '{address}', expected host:port")
    return (host or "127.0.0.1", int(port))
