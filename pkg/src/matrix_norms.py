"""Dense symmetric-matrix utilities: norms, eigenvalue queries and sparsity degree."""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from src.exceptions import DomainError, NumericalFailureError, ShapeError

# Eigenvalues below this fraction of the largest one are treated as zero.
RELATIVE_EIGEN_CUTOFF = 1e-12


@dataclass(frozen=True)
class NormBundle:
    """The four matrix norms of a single matrix."""

    frobenius: float
    operator: float
    max_abs: float
    sigma: Optional[float] = None


def _as_matrix(a) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2:
        raise ShapeError(f"Expected a 2-D matrix, got array with shape {arr.shape}")
    return arr


def _as_square(a) -> np.ndarray:
    arr = _as_matrix(a)
    if arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise ShapeError(f"Expected a non-empty square matrix, got shape {arr.shape}")
    return arr


def symmetrize(a) -> np.ndarray:
    """Return (A + A')/2, which is exactly symmetric in floating point."""
    arr = _as_square(a)
    return 0.5 * (arr + arr.T)


def symmetric_eig(a: np.ndarray):
    """Eigenvalues (ascending) and eigenvectors of a symmetric matrix."""
    try:
        return scipy.linalg.eigh(a)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NumericalFailureError(f"Symmetric eigen decomposition failed: {e}") from e


def _eigvalsh(a: np.ndarray) -> np.ndarray:
    try:
        return scipy.linalg.eigvalsh(a)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NumericalFailureError(f"Symmetric eigenvalue computation failed: {e}") from e


def frobenius_norm(a) -> float:
    """tr(A'A)^{1/2}."""
    return float(np.linalg.norm(_as_matrix(a), "fro"))


def operator_norm(a) -> float:
    """Largest singular value of ``a``."""
    arr = _as_matrix(a)
    if arr.size == 0:
        return 0.0
    try:
        return float(scipy.linalg.svdvals(arr)[0])
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NumericalFailureError(f"Singular value computation failed: {e}") from e


def max_norm(a) -> float:
    """Largest absolute entry."""
    arr = _as_matrix(a)
    if arr.size == 0:
        return 0.0
    return float(np.max(np.abs(arr)))


def eigenvalues(a) -> np.ndarray:
    """Ascending eigenvalues of a symmetric matrix."""
    return _eigvalsh(_as_square(a))


def min_eigenvalue(a) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    return float(eigenvalues(a)[0])


def is_positive_definite(a) -> bool:
    """True when the smallest eigenvalue is strictly positive."""
    return min_eigenvalue(a) > 0.0


def spectral_radius(a) -> float:
    """Largest eigenvalue modulus of a general square matrix."""
    arr = _as_square(a)
    try:
        return float(np.max(np.abs(scipy.linalg.eigvals(arr))))
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NumericalFailureError(f"Eigenvalue computation failed: {e}") from e


def symmetric_sqrt(a, tol: float = RELATIVE_EIGEN_CUTOFF) -> np.ndarray:
    """
    Symmetric square root Q diag(sqrt(lambda)) Q' of a PSD matrix.

    Eigenvalues that are negative but within ``tol`` of the largest one are
    clipped to zero; anything more negative means the input is not PSD.

    Args:
        a: Symmetric positive semidefinite matrix
        tol: Relative tolerance for negative eigenvalues

    Returns:
        Symmetric matrix S with S @ S == a
    """
    arr = symmetrize(a)
    vals, vecs = symmetric_eig(arr)
    scale = float(np.max(np.abs(vals)))
    if vals[0] < -tol * max(scale, 1.0):
        raise DomainError(f"Matrix is not positive semidefinite (min eigenvalue {vals[0]:.3e})")
    root = (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T
    return symmetrize(root)


def inverse_sqrt(a) -> np.ndarray:
    """
    Symmetric inverse square root of a positive definite matrix.

    Raises:
        DomainError: when an eigenvalue is at or below 1e-12 times the largest.
    """
    arr = symmetrize(a)
    vals, vecs = symmetric_eig(arr)
    lam_max = float(vals[-1])
    if lam_max <= 0.0 or vals[0] <= RELATIVE_EIGEN_CUTOFF * lam_max:
        raise DomainError(
            f"Matrix is not positive definite (min eigenvalue {vals[0]:.3e}, max {lam_max:.3e})"
        )
    root = (vecs / np.sqrt(vals)) @ vecs.T
    return symmetrize(root)


def sigma_norm(a, sigma_true) -> float:
    """
    Entropy-loss norm p^{-1/2} ||Sigma^{-1/2} A Sigma^{-1/2}||_F.

    Args:
        a: Symmetric matrix, usually an estimation error
        sigma_true: Positive definite reference covariance

    Returns:
        The normalized relative error
    """
    arr = _as_square(a)
    ref = _as_square(sigma_true)
    if arr.shape != ref.shape:
        raise ShapeError(f"Shape mismatch: {arr.shape} vs reference {ref.shape}")
    root_inv = inverse_sqrt(ref)
    p = arr.shape[0]
    return frobenius_norm(root_inv @ arr @ root_inv) / np.sqrt(p)


def sparsity_degree(a, tol: float = 0.0) -> int:
    """Maximum over rows of the number of entries with |a_ij| > tol."""
    if tol < 0:
        raise DomainError(f"tol must be nonnegative, got {tol}")
    arr = _as_square(a)
    return int(np.max(np.sum(np.abs(arr) > tol, axis=1)))


def norm_bundle(a, sigma=None) -> NormBundle:
    """Compute all norms of ``a``; the sigma norm only when a reference is given."""
    return NormBundle(
        frobenius=frobenius_norm(a),
        operator=operator_norm(a),
        max_abs=max_norm(a),
        sigma=sigma_norm(a, sigma) if sigma is not None else None,
    )
