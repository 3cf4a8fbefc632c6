"""Reading panels and SUR manifests from CSV, and writing matrices back out."""

from pathlib import Path
from typing import List

import numpy as np

from src.exceptions import ConfigurationError, ShapeError
from src.factor_regression import Panel
from src.sur_gls import SurEquation, SurModel
from utils.logger import setup_logger
from utils.validators import validate_csv_file, validate_manifest_file

logger = setup_logger(__name__)

# 17 significant digits round-trip every double exactly.
FLOAT_FORMAT = "%.17g"


def read_matrix_csv(file_path: str, header: bool = False) -> np.ndarray:
    """
    Load a comma-separated numeric matrix.

    Args:
        file_path: Path to the CSV file
        header: Skip the first line when True

    Returns:
        2-D array (a single row or column is returned as a 1 x n / n x 1 matrix)
    """
    is_valid, error_msg = validate_csv_file(file_path)
    if not is_valid:
        raise FileNotFoundError(error_msg)
    try:
        matrix = np.loadtxt(file_path, delimiter=",", skiprows=1 if header else 0, ndmin=2)
    except ValueError as e:
        raise ConfigurationError(f"Cannot parse numeric CSV {file_path}: {e}") from e
    logger.debug(f"Read {matrix.shape[0]}x{matrix.shape[1]} matrix from {file_path}")
    return matrix


def write_matrix_csv(file_path: str, matrix: np.ndarray) -> Path:
    """Write a dense matrix row-major with 17 significant digits."""
    path = Path(file_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.atleast_2d(matrix), delimiter=",", fmt=FLOAT_FORMAT)
    return path


def write_mask_csv(file_path: str, mask: np.ndarray) -> Path:
    """Write a boolean matrix as 0/1 integers."""
    path = Path(file_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.asarray(mask, dtype=int), delimiter=",", fmt="%d")
    return path


def load_panel(y_path: str, f_path: str, header: bool = False) -> Panel:
    """
    Load observations (p rows x T columns) and factors (K rows x T columns).

    Returns:
        Panel
    """
    y = read_matrix_csv(y_path, header=header)
    f = read_matrix_csv(f_path, header=header)
    if y.shape[1] != f.shape[1]:
        raise ShapeError(
            f"{y_path} has {y.shape[1]} periods but {f_path} has {f.shape[1]}"
        )
    logger.info(f"Loaded panel with p={y.shape[0]}, K={f.shape[0]}, T={y.shape[1]}")
    return Panel(y=y, f=f)


def load_sur_manifest(manifest_path: str, header: bool = False) -> SurModel:
    """
    Load a SUR system from a manifest.

    Each non-blank, non-comment line holds ``y_path, x_path`` for one
    equation; relative paths are resolved against the manifest's directory.
    The y file holds T values (one row or one column); the x file is T x K_i.
    """
    is_valid, error_msg = validate_manifest_file(manifest_path)
    if not is_valid:
        raise FileNotFoundError(error_msg)

    base = Path(manifest_path).resolve().parent
    equations: List[SurEquation] = []
    for lineno, raw in enumerate(Path(manifest_path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [part.strip() for part in line.split(",")]
        if len(parts) != 2:
            raise ConfigurationError(
                f"{manifest_path}:{lineno}: expected 'y_path, x_path', got '{line}'"
            )
        y_path, x_path = (str(base / part) for part in parts)
        y = read_matrix_csv(y_path, header=header).reshape(-1)
        x = read_matrix_csv(x_path, header=header)
        if x.shape[0] != y.shape[0] and x.shape[1] == y.shape[0]:
            x = x.T
        equations.append(SurEquation(y=y, x=x))

    logger.info(f"Loaded SUR manifest {manifest_path} with {len(equations)} equation(s)")
    return SurModel(equations=tuple(equations))
