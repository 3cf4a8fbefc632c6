"""Input validation utilities."""

import os
from pathlib import Path
from typing import Optional, Tuple


def validate_csv_file(file_path: str) -> Tuple[bool, Optional[str]]:
    """
    Validate that a file exists, is non-empty and looks like a CSV.

    Args:
        file_path: Path to the file to validate

    Returns:
        Tuple of (is_valid, error_message)
    """
    path = Path(file_path)

    if not path.exists():
        return False, f"File does not exist: {file_path}"

    if not path.is_file():
        return False, f"Path is not a file: {file_path}"

    if path.suffix.lower() not in ('.csv', '.txt'):
        return False, f"File is not a CSV: {file_path}"

    if path.stat().st_size == 0:
        return False, f"File is empty: {file_path}"

    return True, None


def validate_manifest_file(file_path: str) -> Tuple[bool, Optional[str]]:
    """Validate that a SUR manifest exists and is readable."""
    path = Path(file_path)

    if not path.is_file():
        return False, f"Manifest does not exist: {file_path}"

    if not os.access(path, os.R_OK):
        return False, f"Manifest is not readable: {file_path}"

    if path.stat().st_size == 0:
        return False, f"Manifest is empty: {file_path}"

    return True, None


def validate_output_directory(dir_path: str) -> Tuple[bool, Optional[str]]:
    """
    Validate that an output directory exists (creating it if needed) and is writable.

    Args:
        dir_path: Path to the directory to validate

    Returns:
        Tuple of (is_valid, error_message)
    """
    path = Path(dir_path)

    if path.exists() and not path.is_dir():
        return False, f"Path is not a directory: {dir_path}"

    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        return False, f"Cannot create output directory {dir_path}: {e}"

    if not os.access(path, os.W_OK):
        return False, f"Directory is not writable: {dir_path}"

    return True, None
