"""OLS estimation of factor loadings, residuals and sample covariances."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.exceptions import DomainError, InsufficientDataError, RankDeficiencyError, ShapeError
from src.matrix_norms import RELATIVE_EIGEN_CUTOFF, symmetric_eig, symmetrize
from utils.logger import setup_logger

logger = setup_logger(__name__)


@dataclass(frozen=True)
class Panel:
    """
    Observed series paired with observable factors.

    Attributes:
        y: p x T observations, one row per series
        f: K x T factors, one row per factor
    """

    y: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        y = np.atleast_2d(np.asarray(self.y, dtype=float))
        f = np.atleast_2d(np.asarray(self.f, dtype=float))
        if y.ndim != 2 or f.ndim != 2:
            raise ShapeError("Panel y and f must be 2-D matrices")
        if y.shape[1] != f.shape[1]:
            raise ShapeError(
                f"y has {y.shape[1]} periods but f has {f.shape[1]}"
            )
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(f))):
            raise DomainError("Panel contains non-finite entries")
        if y.shape[1] <= f.shape[0]:
            raise InsufficientDataError(
                f"Need T > K for OLS, got T={y.shape[1]}, K={f.shape[0]}"
            )
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "f", f)

    @property
    def p(self) -> int:
        return self.y.shape[0]

    @property
    def T(self) -> int:
        return self.y.shape[1]

    @property
    def K(self) -> int:
        return self.f.shape[0]


@dataclass(frozen=True)
class FactorFit:
    """Loadings, residuals and factor covariance from an OLS fit."""

    loadings: np.ndarray
    residuals: np.ndarray
    factor_cov: np.ndarray


def invert_gram(gram: np.ndarray, label: str = "Gram matrix", equation: Optional[int] = None) -> np.ndarray:
    """
    Invert a symmetric Gram matrix through its eigen decomposition.

    Args:
        gram: Symmetric PSD matrix
        label: Name used in the error message
        equation: Optional equation index carried by the error

    Returns:
        The inverse, exactly symmetric

    Raises:
        RankDeficiencyError: when the smallest eigenvalue is at or below
            1e-12 times the largest.
    """
    gram = symmetrize(gram)
    vals, vecs = symmetric_eig(gram)
    k = gram.shape[0]
    if vals[-1] <= 0.0 or vals[0] <= RELATIVE_EIGEN_CUTOFF * vals[-1]:
        raise RankDeficiencyError(
            f"{label} of dimension {k} is singular "
            f"(eigenvalues {vals[0]:.3e} .. {vals[-1]:.3e})",
            dimension=k,
            equation=equation,
        )
    return symmetrize((vecs / vals) @ vecs.T)


def ols_loadings(panel: Panel) -> np.ndarray:
    """
    Per-series OLS coefficients without intercept.

    Row i is (FF')^{-1} F y_i'; every row shares the same Gram inverse.

    Args:
        panel: Observations and factors

    Returns:
        p x K loading matrix
    """
    gram_inv = invert_gram(panel.f @ panel.f.T, label="Factor Gram matrix FF'")
    return panel.y @ panel.f.T @ gram_inv


def residuals(panel: Panel, loadings: np.ndarray) -> np.ndarray:
    """Y - B F."""
    loadings = np.atleast_2d(np.asarray(loadings, dtype=float))
    if loadings.shape != (panel.p, panel.K):
        raise ShapeError(
            f"Loadings must be {(panel.p, panel.K)}, got {loadings.shape}"
        )
    return panel.y - loadings @ panel.f


def factor_sample_cov(f: np.ndarray) -> np.ndarray:
    """
    Factor sample covariance T^{-1} X X' - T^{-2} X 1 1' X' (divisor T).

    Args:
        f: K x T factor matrix

    Returns:
        K x K symmetric PSD matrix
    """
    x = np.atleast_2d(np.asarray(f, dtype=float))
    t = x.shape[1]
    if t < 2:
        raise InsufficientDataError(f"Need at least 2 periods, got {t}")
    row_sums = x.sum(axis=1, keepdims=True)
    cov = (x @ x.T) / t - (row_sums @ row_sums.T) / t ** 2
    return symmetrize(cov)


def sample_cov(y: np.ndarray) -> np.ndarray:
    """Sample covariance with divisor T - 1, rows are series."""
    x = np.atleast_2d(np.asarray(y, dtype=float))
    t = x.shape[1]
    if t < 2:
        raise InsufficientDataError(f"Need at least 2 periods, got {t}")
    centered = x - x.mean(axis=1, keepdims=True)
    return symmetrize(centered @ centered.T / (t - 1))


def fit_factor_model(panel: Panel) -> FactorFit:
    """Run OLS, extract residuals and estimate the factor covariance."""
    loadings = ols_loadings(panel)
    fit = FactorFit(
        loadings=loadings,
        residuals=residuals(panel, loadings),
        factor_cov=factor_sample_cov(panel.f),
    )
    logger.debug(f"Fitted factor model with p={panel.p}, K={panel.K}, T={panel.T}")
    return fit
