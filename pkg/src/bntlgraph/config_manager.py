"""
Configuration Manager - Run configuration handling
Loads JSON or TOML run configurations, merges them over the defaults and
validates the result against the packaged JSON Schema
"""

import copy
import json
import logging
import sys
from importlib import resources
from pathlib import Path
from typing import Any, Dict, Optional, Union

import jsonschema

from .errors import ParameterError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


logger = logging.getLogger(__name__)


class ConfigManager:
    """
    Run configuration management.

    Handles:
    - Default values for every section
    - Loading a user file (.json or .toml) over the defaults
    - Schema validation
    - Saving the effective configuration next to run outputs
    """

    DEFAULT_CONFIG: Dict[str, Any] = {
        "chain": {
            "iterations": 125000,
            "burn_in": 25000,
            "thin": 10,
            "swap_sweeps": None,
            "alpha_width": 1.0,
            "theta_width": 1.0,
            "tau_width": 0.1,
            "max_steps_out": 50,
            "initial_alpha": None,
            "update_alpha": True,
            "update_phi": True,
            "debug_checks": False,
            "log_every": 1000,
            "chains": 1,
        },
        "priors": {
            "alpha": {"kind": "uniform", "low": -100.0, "high": 1.0, "loc": 0.0, "scale": 1.0},
            "beta_a": 1.0,
            "beta_b": 1.0,
            "lam_shape": 1.0,
            "lam_rate": 1.0,
            "tau_a": 1.0,
            "tau_b": 1.0,
            "theta_max": 1e4,
        },
        "mle": {
            "alpha_lower": -1e3,
            "alpha_eps": 1e-9,
            "grid_points": 1000,
            "theta_max": 1e4,
            "coupled_theta_max": 1e7,
            "geometric_estimator": "closed-form",
        },
        "ingest": {
            "timestamps": "auto",
            "end_order": "src-first",
            "drop_self_loops": False,
            "drop_duplicates": False,
            "comment_prefix": "#",
            "chunk_size": 1_000_000,
        },
        "generate": {
            "sampler": "predictive",
            "fenwick_threshold": 20000,
        },
        "logging": {
            "level": "INFO",
            "file": None,
            "console": True,
        },
    }

    def __init__(self, config_path: Optional[Union[str, Path]] = None):
        """
        Initialize config manager.

        Args:
            config_path: Path to a .json or .toml file (defaults only when None)

        Raises:
            ParameterError: The given file is missing, unreadable or invalid
        """
        self.config_path = Path(config_path) if config_path else None
        self.config = copy.deepcopy(self.DEFAULT_CONFIG)
        self.load()

    @staticmethod
    def schema() -> Dict[str, Any]:
        """The packaged JSON Schema for configuration documents."""
        text = resources.files("bntlgraph").joinpath("schemas/config_schema.json").read_text(encoding="utf-8")
        return json.loads(text)

    def load(self) -> bool:
        """
        Load configuration from file.

        Returns:
            True if a file was read, False when running on defaults
        """
        if self.config_path is None:
            self.validate()
            return False

        if not self.config_path.exists():
            raise ParameterError("config_not_found", f"Config file not found: {self.config_path}")

        try:
            if self.config_path.suffix == ".toml":
                with open(self.config_path, "rb") as f:
                    user_config = tomllib.load(f)
            else:
                with open(self.config_path, "r", encoding="utf-8") as f:
                    user_config = json.load(f)
        except (OSError, ValueError) as e:
            raise ParameterError("config_unreadable", f"Error loading config {self.config_path}: {e}") from e

        self.config = self._deep_merge(self.DEFAULT_CONFIG, user_config)
        self.validate()
        logger.info(f"Loaded config from {self.config_path}")
        return True

    def validate(self) -> None:
        """Validate the effective configuration against the schema."""
        try:
            jsonschema.validate(self.config, self.schema())
        except jsonschema.ValidationError as e:
            location = ".".join(str(part) for part in e.absolute_path) or "<root>"
            raise ParameterError("invalid_config", f"Config error at {location}: {e.message}", key=location) from e

    def save(self, path: Union[str, Path]) -> Path:
        """
        Save the effective configuration as JSON.

        Args:
            path: Destination file

        Returns:
            The written path
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.config, f, indent=2)
        logger.debug(f"Saved config to {path}")
        return path

    def get(self, key_path: str, default: Any = None) -> Any:
        """
        Get config value by dot-separated path.

        Args:
            key_path: Path like "chain.iterations"
            default: Default value if key not found

        Returns:
            Config value or default
        """
        value = self.config
        for key in key_path.split("."):
            if isinstance(value, dict) and key in value:
                value = value[key]
            else:
                return default
        return value

    def set(self, key_path: str, value: Any) -> None:
        """
        Set config value by dot-separated path and revalidate.

        Args:
            key_path: Path like "priors.alpha.low"
            value: Value to set
        """
        keys = key_path.split(".")
        config = self.config
        for key in keys[:-1]:
            config = config.setdefault(key, {})
        config[keys[-1]] = value
        self.validate()

    def apply_overrides(self, overrides: Dict[str, Any]) -> None:
        """Set every non-None dot-path value (command-line flags win over the file)."""
        for key_path, value in overrides.items():
            if value is not None:
                self.set(key_path, value)

    @staticmethod
    def _deep_merge(base: Dict, override: Dict) -> Dict:
        """
        Deep merge override dict into base dict.

        Args:
            base: Base configuration
            override: Configuration to merge

        Returns:
            Merged configuration
        """
        result = copy.deepcopy(base)
        for key, value in override.items():
            if key in result and isinstance(result[key], dict) and isinstance(value, dict):
                result[key] = ConfigManager._deep_merge(result[key], value)
            else:
                result[key] = value
        return result
