"""
Low-rank-plus-sparse covariance estimates built from a factor fit.

The estimate keeps B, cov(f) and the thresholded idiosyncratic covariance
separately. The full p x p matrix is densified only on request, and the
precision matrix is always obtained through the Sherman-Morrison-Woodbury
identity, so only K x K systems and the idiosyncratic matrix are inverted.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.adaptive_threshold import (
    ThresholdedCovariance,
    adaptive_threshold,
    correlation_threshold_path,
    invert_spd,
    residual_moments,
    threshold_level,
)
from src.exceptions import DomainError, ShapeError, SingularMatrixError
from src.factor_regression import FactorFit, Panel, fit_factor_model
from src.matrix_norms import (
    frobenius_norm,
    inverse_sqrt,
    max_norm,
    operator_norm,
    symmetrize,
)
from utils.logger import setup_logger

logger = setup_logger(__name__)


@dataclass(frozen=True)
class FactorCovEstimate:
    """Sigma_hat = B cov(f) B' + Sigma_u, stored by parts."""

    loadings: np.ndarray
    factor_cov: np.ndarray
    idio_cov: ThresholdedCovariance

    def __post_init__(self):
        loadings = np.atleast_2d(np.asarray(self.loadings, dtype=float))
        factor_cov = np.atleast_2d(np.asarray(self.factor_cov, dtype=float))
        p, k = loadings.shape
        if factor_cov.shape != (k, k):
            raise ShapeError(f"factor_cov must be {(k, k)}, got {factor_cov.shape}")
        if self.idio_cov.dim != p:
            raise ShapeError(
                f"Loadings have {p} rows but idiosyncratic covariance has dim {self.idio_cov.dim}"
            )
        object.__setattr__(self, "loadings", loadings)
        object.__setattr__(self, "factor_cov", factor_cov)

    @property
    def dim(self) -> int:
        return self.loadings.shape[0]

    @property
    def n_factors(self) -> int:
        return self.loadings.shape[1]

    def low_rank(self) -> np.ndarray:
        """B cov(f) B'."""
        return symmetrize(self.loadings @ self.factor_cov @ self.loadings.T)


@dataclass(frozen=True)
class ErrorReport:
    """Estimation errors of a covariance estimate against the truth."""

    sigma_norm_err: float
    max_norm_err: float
    frobenius_err: float
    operator_norm_inv_err: Optional[float] = None


def assemble_sigma(est: FactorCovEstimate) -> np.ndarray:
    """Dense B cov(f) B' + Sigma_u^T."""
    return est.low_rank() + est.idio_cov.matrix


def woodbury_precision(est: FactorCovEstimate) -> np.ndarray:
    """
    Precision of the assembled estimate via Sherman-Morrison-Woodbury.

    (S + B C B')^{-1} = S^{-1} - S^{-1} B [C^{-1} + B' S^{-1} B]^{-1} B' S^{-1}

    Args:
        est: Factor covariance estimate with a PD idiosyncratic part

    Returns:
        p x p precision matrix

    Raises:
        SingularMatrixError: when the idiosyncratic covariance is not PD
        DomainError: when the factor covariance is not PD
    """
    try:
        idio_inv = invert_spd(est.idio_cov.matrix)
    except SingularMatrixError as e:
        raise SingularMatrixError(
            f"Thresholded idiosyncratic covariance is not positive definite "
            f"(min eigenvalue {e.min_eigenvalue:.3e}); try a larger threshold omega "
            f"(current {est.idio_cov.omega:.4g})",
            min_eigenvalue=e.min_eigenvalue,
        ) from e

    try:
        factor_inv = invert_spd(est.factor_cov)
    except SingularMatrixError as e:
        raise DomainError(
            f"Factor covariance is not positive definite (min eigenvalue {e.min_eigenvalue:.3e})"
        ) from e

    b = est.loadings
    if not np.any(b):
        return idio_inv

    sb = idio_inv @ b
    inner = invert_spd(factor_inv + b.T @ sb)
    return symmetrize(idio_inv - sb @ inner @ sb.T)


def error_report(
    estimate: np.ndarray,
    estimate_inv: Optional[np.ndarray],
    truth: np.ndarray,
) -> ErrorReport:
    """
    Sigma-norm, max-norm and Frobenius errors, plus the operator-norm error of
    the inverse when ``estimate_inv`` is supplied.

    Raises:
        DomainError: when the truth is not positive definite
    """
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimate.shape != truth.shape:
        raise ShapeError(f"Estimate shape {estimate.shape} differs from truth {truth.shape}")

    root_inv = inverse_sqrt(truth)
    diff = estimate - truth
    p = truth.shape[0]
    sigma_err = frobenius_norm(root_inv @ diff @ root_inv) / np.sqrt(p)

    inv_err = None
    if estimate_inv is not None:
        truth_inv = root_inv @ root_inv
        inv_err = operator_norm(np.asarray(estimate_inv, dtype=float) - truth_inv)

    return ErrorReport(
        sigma_norm_err=float(sigma_err),
        max_norm_err=max_norm(diff),
        frobenius_err=frobenius_norm(diff),
        operator_norm_inv_err=inv_err,
    )


def portfolio_variance_bound(w: np.ndarray, max_norm_err: float) -> float:
    """Bound on the portfolio variance error: ||Sigma_hat - Sigma||_Max * ||w||_1^2."""
    gross = float(np.sum(np.abs(np.asarray(w, dtype=float))))
    return max_norm_err * gross ** 2


def estimate_factor_covariance(
    panel: Panel,
    threshold_c: float = 0.10,
    omega: Optional[float] = None,
) -> FactorCovEstimate:
    """
    Fit OLS loadings and threshold the residual covariance.

    Args:
        panel: Observations and factors
        threshold_c: Constant C in omega_T = C K sqrt(log p / T)
        omega: Explicit threshold, overriding ``threshold_c`` when given

    Returns:
        FactorCovEstimate
    """
    fit = fit_factor_model(panel)
    moments = residual_moments(fit.residuals)
    if omega is None:
        omega = threshold_level(threshold_c, panel.K, panel.p, panel.T)
    idio = adaptive_threshold(moments, omega)
    logger.info(
        f"Estimated factor covariance: p={panel.p}, K={panel.K}, T={panel.T}, "
        f"omega={omega:.4g}, off-diagonal kept={idio.offdiag_kept}"
    )
    return FactorCovEstimate(loadings=fit.loadings, factor_cov=fit.factor_cov, idio_cov=idio)


def factor_covariance_path(fit: FactorFit, lam: float) -> FactorCovEstimate:
    """
    Estimate on the correlation-threshold path.

    ``lam = 0`` keeps the full residual sample covariance; ``lam = 1``
    gives the strict factor model with a diagonal idiosyncratic part.
    """
    sigma_u = residual_moments(fit.residuals).sigma_hat
    idio = ThresholdedCovariance.from_matrix(correlation_threshold_path(sigma_u, lam), omega=lam)
    return FactorCovEstimate(loadings=fit.loadings, factor_cov=fit.factor_cov, idio_cov=idio)
