"""
Seemingly unrelated regression with a thresholded error covariance.

Each equation i has its own regressors x_i (T x K_i). Equations are coupled
only through the cross-sectional error covariance. Stacking is by equation:
y = (y_1', ..., y_p')', X = blockdiag(x_1, ..., x_p), and the GLS weight is
precision kron I_T, so block (i, j) of X'WX is precision_ij * x_i' x_j.
"""

from dataclasses import dataclass, field, replace
from typing import List, Sequence, Tuple

import numpy as np

from src.adaptive_threshold import (
    ThresholdedCovariance,
    adaptive_threshold,
    invert_spd,
    residual_moments,
    threshold_level,
)
from src.exceptions import DomainError, RankDeficiencyError, ShapeError, SingularMatrixError
from src.factor_regression import invert_gram
from src.matrix_norms import symmetrize
from utils.logger import setup_logger

logger = setup_logger(__name__)

METHOD_OLS = "ols"
METHOD_FEASIBLE_GLS = "feasible_gls"


@dataclass(frozen=True)
class SurEquation:
    """One equation: response y (length T) and regressors x (T x K_i)."""

    y: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1)
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        if x.ndim != 2 or x.shape[0] != y.shape[0]:
            raise ShapeError(f"Regressors of shape {x.shape} do not match {y.shape[0]} observations")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)

    @property
    def k(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class SurModel:
    """A system of p equations sharing T periods."""

    equations: Tuple[SurEquation, ...]

    def __post_init__(self):
        equations = tuple(self.equations)
        if not equations:
            raise ShapeError("A SUR model needs at least one equation")
        t = equations[0].y.shape[0]
        for i, eq in enumerate(equations):
            if eq.y.shape[0] != t:
                raise ShapeError(f"Equation {i} has {eq.y.shape[0]} periods, expected {t}")
            if eq.k < 1 or t <= eq.k:
                raise ShapeError(f"Equation {i} needs 1 <= K_i < T, got K_i={eq.k}, T={t}")
        object.__setattr__(self, "equations", equations)

    @property
    def p(self) -> int:
        return len(self.equations)

    @property
    def T(self) -> int:
        return self.equations[0].y.shape[0]

    @property
    def k_max(self) -> int:
        return max(eq.k for eq in self.equations)

    @property
    def block_sizes(self) -> List[int]:
        return [eq.k for eq in self.equations]


@dataclass(frozen=True)
class GlsFit:
    """Coefficients of a SUR fit with its residuals and residual covariance."""

    coefficients: Tuple[np.ndarray, ...]
    residuals: np.ndarray
    residual_cov: ThresholdedCovariance
    method: str
    block_sizes: List[int] = field(default_factory=list)

    @property
    def coefficient_vector(self) -> np.ndarray:
        return np.concatenate(self.coefficients)

    @property
    def k_max(self) -> int:
        return max(len(b) for b in self.coefficients)


def _residuals(model: SurModel, coefficients: Sequence[np.ndarray]) -> np.ndarray:
    return np.vstack([eq.y - eq.x @ b for eq, b in zip(model.equations, coefficients)])


def sur_ols(model: SurModel) -> GlsFit:
    """
    Equation-by-equation OLS; the residual covariance is left unthresholded.

    Raises:
        RankDeficiencyError: naming the equation whose x_i'x_i is singular
    """
    coefficients = []
    for i, eq in enumerate(model.equations):
        try:
            gram_inv = invert_gram(eq.x.T @ eq.x, label=f"Gram matrix of equation {i}", equation=i)
        except RankDeficiencyError as e:
            logger.error(f"OLS failed for equation {i}: {e}")
            raise
        coefficients.append(gram_inv @ (eq.x.T @ eq.y))

    resid = _residuals(model, coefficients)
    residual_cov = adaptive_threshold(residual_moments(resid), 0.0)
    return GlsFit(
        coefficients=tuple(coefficients),
        residuals=resid,
        residual_cov=residual_cov,
        method=METHOD_OLS,
        block_sizes=model.block_sizes,
    )


def sur_threshold(fit: GlsFit, c: float, p: int, t: int) -> ThresholdedCovariance:
    """Threshold the OLS residual covariance at omega = c * K * sqrt(ln p / t), K = max K_i."""
    moments = residual_moments(fit.residuals)
    omega = threshold_level(c, fit.k_max, p, t)
    return adaptive_threshold(moments, omega)


def _check_weight(precision: np.ndarray, p: int) -> np.ndarray:
    precision = np.atleast_2d(np.asarray(precision, dtype=float))
    if precision.shape != (p, p):
        raise ShapeError(f"Precision must be {(p, p)}, got {precision.shape}")
    precision = symmetrize(precision)
    try:
        invert_spd(precision)
    except SingularMatrixError as e:
        raise DomainError(
            f"GLS weight is not positive definite (min eigenvalue {e.min_eigenvalue:.3e})"
        ) from e
    return precision


def feasible_gls(
    model: SurModel,
    precision: np.ndarray,
    literal_weight: bool = False,
) -> GlsFit:
    """
    GLS with weight precision kron I_T, assembled block by block.

    Args:
        model: SUR system
        precision: p x p positive definite error precision
        literal_weight: Use the inverse of ``precision`` as the weight instead,
            i.e. the double-inverse reading; for comparison only

    Returns:
        GlsFit tagged ``feasible_gls``

    Raises:
        DomainError: when the precision is not positive definite
        RankDeficiencyError: when X'WX is singular
    """
    weight = _check_weight(precision, model.p)
    if literal_weight:
        weight = invert_spd(weight)

    sizes = model.block_sizes
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    n = int(offsets[-1])
    xtwx = np.zeros((n, n))
    xtwy = np.zeros(n)
    eqs = model.equations
    for i, eq_i in enumerate(eqs):
        rows = slice(offsets[i], offsets[i + 1])
        for j, eq_j in enumerate(eqs):
            w_ij = weight[i, j]
            if w_ij == 0.0:
                continue
            cols = slice(offsets[j], offsets[j + 1])
            xtwx[rows, cols] = w_ij * (eq_i.x.T @ eq_j.x)
            xtwy[rows] += w_ij * (eq_i.x.T @ eq_j.y)

    stacked = invert_gram(xtwx, label="Weighted normal matrix X'WX") @ xtwy
    coefficients = tuple(stacked[offsets[i]:offsets[i + 1]].copy() for i in range(model.p))
    resid = _residuals(model, coefficients)
    return GlsFit(
        coefficients=coefficients,
        residuals=resid,
        residual_cov=adaptive_threshold(residual_moments(resid), 0.0),
        method=METHOD_FEASIBLE_GLS,
        block_sizes=sizes,
    )


def stacked_gls_dense(model: SurModel, weight: np.ndarray) -> np.ndarray:
    """
    Brute-force GLS on the materialized pT x pT weight weight kron I_T.

    Only for small systems; returns the stacked coefficient vector.
    """
    t = model.T
    x = np.zeros((model.p * t, sum(model.block_sizes)))
    col = 0
    for i, eq in enumerate(model.equations):
        x[i * t:(i + 1) * t, col:col + eq.k] = eq.x
        col += eq.k
    y = np.concatenate([eq.y for eq in model.equations])
    w = np.kron(np.asarray(weight, dtype=float), np.eye(t))
    return np.linalg.solve(x.T @ w @ x, x.T @ w @ y)


def run_feasible_gls(
    model: SurModel,
    threshold_c: float = 0.10,
    literal_weight: bool = False,
) -> Tuple[GlsFit, ThresholdedCovariance, GlsFit]:
    """
    Two-stage feasible GLS.

    OLS residuals are thresholded, the thresholded covariance is inverted and
    used as the GLS weight.

    Returns:
        Tuple of (ols_fit, thresholded_residual_cov, gls_fit)
    """
    ols_fit = sur_ols(model)
    thresholded = sur_threshold(ols_fit, threshold_c, model.p, model.T)
    logger.info(
        f"SUR residual covariance thresholded at omega={thresholded.omega:.4g}: "
        f"{thresholded.offdiag_kept} off-diagonal entries kept"
    )
    precision = invert_spd(thresholded.matrix)
    gls_fit = feasible_gls(model, precision, literal_weight=literal_weight)
    return ols_fit, thresholded, replace(gls_fit, residual_cov=thresholded)
