"""
Entry-adaptive hard thresholding of a residual covariance matrix.

Off-diagonal entry (i, j) of the residual covariance survives when
|sigma_ij| >= sqrt(theta_ij) * omega, where theta_ij estimates the sampling
variability of u_it * u_jt. Diagonal entries are never thresholded.
"""

import math
from dataclasses import dataclass

import numpy as np

from src.exceptions import DomainError, InsufficientDataError, SingularMatrixError
from src.matrix_norms import symmetric_eig, symmetrize
from utils.logger import setup_logger

logger = setup_logger(__name__)


@dataclass(frozen=True)
class ResidualMoments:
    """Entrywise residual covariance and its variability estimate."""

    sigma_hat: np.ndarray
    theta_hat: np.ndarray
    T: int

    @property
    def p(self) -> int:
        return self.sigma_hat.shape[0]


@dataclass(frozen=True)
class ThresholdedCovariance:
    """A thresholded covariance together with the threshold that produced it."""

    matrix: np.ndarray
    omega: float
    kept_mask: np.ndarray

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, omega: float = 0.0) -> "ThresholdedCovariance":
        """Wrap an already-thresholded matrix; the mask is its nonzero pattern plus the diagonal."""
        matrix = symmetrize(matrix)
        mask = matrix != 0.0
        np.fill_diagonal(mask, True)
        return cls(matrix=matrix, omega=float(omega), kept_mask=mask)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def offdiag_kept(self) -> int:
        """Number of surviving off-diagonal entries (both triangles)."""
        return int(self.kept_mask.sum() - self.dim)


def residual_moments(residuals: np.ndarray) -> ResidualMoments:
    """
    Compute sigma_hat = U U' / T and theta_hat_ij = T^{-1} sum_t (u_it u_jt - sigma_ij)^2.

    Residuals are not demeaned. theta is evaluated as the mean of squared
    products minus sigma^2, which avoids the p x p x T intermediate; tiny
    negative values from cancellation are clipped to zero.

    Args:
        residuals: p x T residual matrix

    Returns:
        ResidualMoments
    """
    u = np.atleast_2d(np.asarray(residuals, dtype=float))
    t = u.shape[1]
    if t < 2:
        raise InsufficientDataError(f"Need at least 2 periods, got {t}")
    sigma = symmetrize(u @ u.T / t)
    sq = u * u
    theta = symmetrize(sq @ sq.T / t - sigma * sigma)
    np.clip(theta, 0.0, None, out=theta)
    return ResidualMoments(sigma_hat=sigma, theta_hat=theta, T=t)


def threshold_level(c: float, k: int, p: int, t: int) -> float:
    """omega_T = c * k * sqrt(ln p / t)."""
    if c <= 0:
        raise DomainError(f"Threshold constant must be positive, got {c}")
    if p < 2:
        raise DomainError(f"Need p >= 2 for a positive log p, got p={p}")
    if t < 1 or k < 1:
        raise DomainError(f"Need t >= 1 and k >= 1, got t={t}, k={k}")
    return c * k * math.sqrt(math.log(p) / t)


def threshold_level_general(c: float, p: int, t: int, a_t: float) -> float:
    """omega_T = c * (sqrt(ln p / t) + a_t) for an arbitrary first-stage rate a_t."""
    if c <= 0:
        raise DomainError(f"Threshold constant must be positive, got {c}")
    if p < 2 or t < 1:
        raise DomainError(f"Need p >= 2 and t >= 1, got p={p}, t={t}")
    if a_t < 0:
        raise DomainError(f"Rate a_t must be nonnegative, got {a_t}")
    return c * (math.sqrt(math.log(p) / t) + a_t)


def noise_level_threshold_c(k: int, delta: float = 2.0) -> float:
    """
    Constant c for which threshold_level(c, k, p, t) == delta * sqrt(ln p / t).

    Since sqrt(theta_ij / t) is the standard error of sigma_ij, an entry then
    survives only when it lies about delta * sqrt(ln p) standard errors from
    zero. With c = 0.10 and k = 3 that multiple is 0.3 * sqrt(ln p), which
    keeps roughly half of the null entries and loses positive definiteness
    once p exceeds t.
    """
    if k < 1:
        raise DomainError(f"Need k >= 1, got {k}")
    if delta <= 0:
        raise DomainError(f"delta must be positive, got {delta}")
    return delta / k


def adaptive_threshold(moments: ResidualMoments, omega: float) -> ThresholdedCovariance:
    """
    Apply the entry-adaptive hard threshold.

    Args:
        moments: Residual moments
        omega: Threshold level (0 keeps every entry)

    Returns:
        ThresholdedCovariance with the surviving entries
    """
    if omega < 0:
        raise DomainError(f"omega must be nonnegative, got {omega}")
    sigma = moments.sigma_hat
    keep = np.abs(sigma) >= np.sqrt(moments.theta_hat) * omega
    np.fill_diagonal(keep, True)
    keep = keep & keep.T
    matrix = np.where(keep, sigma, 0.0)
    result = ThresholdedCovariance(matrix=matrix, omega=float(omega), kept_mask=keep)
    logger.debug(
        f"Thresholded p={moments.p} at omega={omega:.6g}: "
        f"{result.offdiag_kept} off-diagonal entries kept"
    )
    return result


def threshold_residuals(residuals: np.ndarray, c: float, k: int) -> ThresholdedCovariance:
    """Moments, omega_T = c k sqrt(ln p / T) and thresholding in one call."""
    moments = residual_moments(residuals)
    omega = threshold_level(c, k, moments.p, moments.T)
    return adaptive_threshold(moments, omega)


def correlation_threshold_path(sigma_hat: np.ndarray, lam: float) -> np.ndarray:
    """
    Threshold the correlation matrix of ``sigma_hat`` at a common level.

    Off-diagonal entries whose correlation is below ``lam`` in absolute value
    are zeroed. ``lam = 0`` returns the input; ``lam >= 1`` keeps only the
    diagonal, which is the strict factor model endpoint.

    Args:
        sigma_hat: Symmetric matrix with a strictly positive diagonal
        lam: Common correlation threshold in [0, 1]

    Returns:
        Thresholded covariance matrix
    """
    sigma = symmetrize(sigma_hat)
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"lambda must lie in [0, 1], got {lam}")
    diag = np.diag(sigma).copy()
    if np.any(diag <= 0):
        raise DomainError("Correlation thresholding needs a strictly positive diagonal")
    if lam >= 1.0:
        return np.diag(diag)
    scale = np.sqrt(diag)
    corr = sigma / np.outer(scale, scale)
    keep = np.abs(corr) >= lam
    np.fill_diagonal(keep, True)
    return np.where(keep & keep.T, sigma, 0.0)


def invert_spd(m: np.ndarray) -> np.ndarray:
    """
    Invert a symmetric positive definite matrix.

    Raises:
        SingularMatrixError: when the smallest eigenvalue is at or below
            1e-12 times the operator norm; the error carries that eigenvalue.
    """
    m = symmetrize(m)
    vals, vecs = symmetric_eig(m)
    scale = float(np.max(np.abs(vals)))
    if vals[0] <= 1e-12 * scale or scale == 0.0:
        raise SingularMatrixError(
            f"Matrix of dimension {m.shape[0]} is not positive definite "
            f"(min eigenvalue {vals[0]:.3e})",
            min_eigenvalue=float(vals[0]),
        )
    return symmetrize((vecs / vals) @ vecs.T)
