"""Configuration management with environment variable support."""

import logging
import os
from pathlib import Path
from typing import Dict, Optional, Tuple

from dotenv import load_dotenv

from src.exceptions import ConfigurationError

# Load environment variables from .env file
load_dotenv()


class Settings:
    """Application settings loaded from environment variables."""

    def __init__(self):
        """Initialize settings from environment variables."""
        self.log_level: str = self._get_env("LOG_LEVEL", "INFO")
        self.output_dir: Path = Path(self._get_env("FACTORCOV_OUTPUT_DIR", "./results"))
        self.threads: Optional[int] = self._get_int_env("FACTORCOV_THREADS")
        self.threshold_c: float = self._get_float_env("FACTORCOV_THRESHOLD_C", 0.10)

    @staticmethod
    def _get_env(key: str, default: Optional[str] = None) -> Optional[str]:
        """Get an optional environment variable."""
        return os.getenv(key, default)

    @staticmethod
    def _get_int_env(key: str) -> Optional[int]:
        """Get an optional integer environment variable."""
        value = os.getenv(key)
        if value is None or value.strip() == "":
            return None
        try:
            return int(value)
        except ValueError:
            raise ConfigurationError(
                f"Environment variable '{key}' must be an integer, got '{value}'"
            )

    @staticmethod
    def _get_float_env(key: str, default: float) -> float:
        """Get a float environment variable with a default."""
        value = os.getenv(key)
        if value is None or value.strip() == "":
            return default
        try:
            return float(value)
        except ValueError:
            raise ConfigurationError(
                f"Environment variable '{key}' must be a number, got '{value}'"
            )

    def validate(self) -> Tuple[bool, Optional[str]]:
        """
        Validate that all settings are usable.

        Returns:
            Tuple of (is_valid, error_message)
        """
        if not isinstance(logging.getLevelName(self.log_level.upper()), int):
            return False, f"LOG_LEVEL must be a logging level name, got '{self.log_level}'"

        if self.threads is not None and self.threads < 1:
            return False, "FACTORCOV_THREADS must be at least 1"

        if self.threshold_c <= 0:
            return False, "FACTORCOV_THRESHOLD_C must be positive"

        return True, None


def load_key_value_file(path: str) -> Dict[str, str]:
    """
    Parse a flat ``key = value`` configuration file.

    Blank lines and lines starting with ``#`` are skipped. Keys are
    lower-cased; values are returned verbatim (stripped).

    Args:
        path: Path to the configuration file

    Returns:
        Mapping of keys to raw string values
    """
    values: Dict[str, str] = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as e:
        raise ConfigurationError(f"Cannot read configuration file {path}: {e}") from e

    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected 'key = value', got '{line}'")
        key, value = line.split("=", 1)
        key = key.strip().lower()
        if not key:
            raise ConfigurationError(f"{path}:{lineno}: empty key")
        values[key] = value.strip()
    return values


def write_key_value_file(path: str, values: Dict[str, str]) -> None:
    """Write a mapping in the format read by :func:`load_key_value_file`."""
    lines = [f"{key} = {value}" for key, value in values.items()]
    Path(path).write_text("\n".join(lines) + "\n")


# Global settings instance
_settings: Optional[Settings] = None


def get_settings() -> Settings:
    """Get the global settings instance."""
    global _settings
    if _settings is None:
        _settings = Settings()
    return _settings


def reset_settings() -> None:
    """Drop the cached settings so the environment is re-read."""
    global _settings
    _settings = None
