"""
Calibrated data-generating process for the Monte Carlo study.

Loadings are drawn from a trivariate normal, factors follow a stationary
VAR(1), and the idiosyncratic covariance is D + s s' - diag(s^2) with a
truncated-gamma D and a sparse normal vector s. All draws go through an
explicit ``numpy.random.Generator``; replications get independent child
generators from ``child_rng``.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from config.settings import load_key_value_file, write_key_value_file
from src.exceptions import CalibrationError, ConfigurationError, DomainError, GenerationError
from src.factor_regression import Panel
from src.matrix_norms import (
    eigenvalues,
    is_positive_definite,
    sparsity_degree,
    spectral_radius,
    symmetric_sqrt,
    symmetrize,
)
from utils.logger import setup_logger

logger = setup_logger(__name__)


def _default(values):
    return field(default_factory=lambda: np.array(values, dtype=float))


@dataclass
class CalibrationParams:
    """Constants of the data-generating process (Fama-French three-factor calibration)."""

    mu_b: np.ndarray = _default([1.0641, 0.1233, -0.0119])
    sigma_b: np.ndarray = _default([
        [0.0475, 0.0218, 0.0488],
        [0.0218, 0.0945, 0.0215],
        [0.0488, 0.0215, 0.1261],
    ])
    mu_f: np.ndarray = _default([0.1074, 0.0357, 0.0033])
    phi: np.ndarray = _default([
        [-0.1149, 0.0024, 0.0776],
        [0.0016, -0.0162, 0.0387],
        [-0.0399, 0.0218, 0.0351],
    ])
    cov_f: np.ndarray = _default([
        [2.2540, 0.2735, 0.9197],
        [0.2735, 0.3767, 0.0430],
        [0.9197, 0.0430, 0.6822],
    ])
    gamma_shape: float = 5.6840
    gamma_scale: float = 0.1503
    sd_lower: float = 0.3533
    sd_upper: float = 1.5222
    sparsity_numerator: float = 0.2
    threshold_c: float = 0.10

    VECTOR_FIELDS = ("mu_b", "mu_f")
    MATRIX_FIELDS = ("sigma_b", "phi", "cov_f")
    SCALAR_FIELDS = (
        "gamma_shape", "gamma_scale", "sd_lower", "sd_upper",
        "sparsity_numerator", "threshold_c",
    )

    @property
    def n_factors(self) -> int:
        return int(self.mu_f.shape[0])

    def validate(self) -> None:
        """
        Check the invariants of the calibration.

        Raises:
            CalibrationError: on the first violated invariant
        """
        k_b = self.mu_b.shape[0]
        k = self.n_factors
        if self.sigma_b.shape != (k_b, k_b):
            raise CalibrationError(f"sigma_b must be {k_b}x{k_b}, got {self.sigma_b.shape}")
        if k_b != k:
            raise CalibrationError(f"Loadings have {k_b} components but there are {k} factors")
        for name in ("phi", "cov_f"):
            if getattr(self, name).shape != (k, k):
                raise CalibrationError(f"{name} must be {k}x{k}, got {getattr(self, name).shape}")
        for name in ("sigma_b", "cov_f"):
            if not is_positive_definite(getattr(self, name)):
                raise CalibrationError(f"{name} is not positive definite")
        radius = spectral_radius(self.phi)
        if radius >= 1.0:
            raise CalibrationError(f"VAR coefficient has spectral radius {radius:.4f} >= 1")
        if not 0 < self.sd_lower < self.sd_upper:
            raise CalibrationError(
                f"Need 0 < sd_lower < sd_upper, got {self.sd_lower}, {self.sd_upper}"
            )
        if self.gamma_shape <= 0 or self.gamma_scale <= 0:
            raise CalibrationError("Gamma shape and scale must be positive")
        if self.sparsity_numerator < 0 or self.threshold_c <= 0:
            raise CalibrationError("sparsity_numerator must be >= 0 and threshold_c > 0")

    def to_mapping(self) -> Dict[str, str]:
        """Serialize to key-value strings; matrix rows are separated by ';'."""
        values: Dict[str, str] = {}
        for name in self.VECTOR_FIELDS:
            values[name] = ", ".join(repr(float(v)) for v in getattr(self, name))
        for name in self.MATRIX_FIELDS:
            rows = getattr(self, name)
            values[name] = "; ".join(", ".join(repr(float(v)) for v in row) for row in rows)
        for name in self.SCALAR_FIELDS:
            values[name] = repr(float(getattr(self, name)))
        return values

    @classmethod
    def from_mapping(cls, values: Dict[str, str]) -> "CalibrationParams":
        """
        Build parameters from key-value strings, falling back to defaults.

        Unknown keys are ignored so that one file can also carry experiment
        settings.
        """
        kwargs = {}
        try:
            for name in cls.VECTOR_FIELDS:
                if name in values:
                    kwargs[name] = np.array([float(v) for v in values[name].split(",")])
            for name in cls.MATRIX_FIELDS:
                if name in values:
                    rows = [r for r in values[name].split(";") if r.strip()]
                    kwargs[name] = np.array([[float(v) for v in r.split(",")] for r in rows])
            for name in cls.SCALAR_FIELDS:
                if name in values:
                    kwargs[name] = float(values[name])
        except ValueError as e:
            raise ConfigurationError(f"Malformed calibration value: {e}") from e
        params = cls(**kwargs)
        params.validate()
        return params

    @classmethod
    def from_file(cls, path: str) -> "CalibrationParams":
        return cls.from_mapping(load_key_value_file(path))

    def save(self, path: str) -> None:
        write_key_value_file(path, self.to_mapping())


@dataclass(frozen=True)
class GroundTruth:
    """True loadings and covariances of one simulated market."""

    loadings: np.ndarray
    sigma_u: np.ndarray
    sigma_full: np.ndarray
    m_t: int

    @property
    def p(self) -> int:
        return self.loadings.shape[0]


def child_rng(master_seed: int, *keys: int) -> np.random.Generator:
    """Independent generator derived from the master seed and integer keys."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), *map(int, keys)]))


def multivariate_normal(
    rng: np.random.Generator,
    mean: np.ndarray,
    cov: np.ndarray,
    size: int,
) -> np.ndarray:
    """
    Draw ``size`` rows from N(mean, cov) using the symmetric square root of cov.

    Returns:
        size x d array
    """
    root = symmetric_sqrt(cov)
    z = rng.standard_normal((size, root.shape[0]))
    return np.asarray(mean, dtype=float) + z @ root


def draw_loadings(params: CalibrationParams, p: int, rng: np.random.Generator) -> np.ndarray:
    """p independent loading vectors from N(mu_b, sigma_b)."""
    if p < 1:
        raise DomainError(f"p must be positive, got {p}")
    return multivariate_normal(rng, params.mu_b, params.sigma_b, p)


def draw_truncated_gamma(params: CalibrationParams, size: int, rng: np.random.Generator) -> np.ndarray:
    """
    Gamma(shape, scale) draws accepted only inside [sd_lower, sd_upper].

    Rejected values are redrawn until every slot holds an accepted value.
    """
    out = np.empty(size)
    pending = np.arange(size)
    while pending.size:
        draws = rng.gamma(params.gamma_shape, params.gamma_scale, pending.size)
        ok = (draws >= params.sd_lower) & (draws <= params.sd_upper)
        out[pending[ok]] = draws[ok]
        pending = pending[~ok]
    return out


def sparsity_probability(params: CalibrationParams, p: int) -> float:
    """Probability that s_i is nonzero: numerator / (sqrt(p) ln p), capped at 1."""
    return min(1.0, params.sparsity_numerator / (math.sqrt(p) * math.log(p)))


def draw_sparse_vector(params: CalibrationParams, p: int, rng: np.random.Generator) -> np.ndarray:
    """s_i ~ N(0, 1) with probability ``sparsity_probability``, else 0."""
    active = rng.random(p) < sparsity_probability(params, p)
    values = rng.standard_normal(p)
    return np.where(active, values, 0.0)


def generate_sparse_error_cov(
    params: CalibrationParams,
    p: int,
    rng: np.random.Generator,
    max_attempts: int = 1000,
) -> np.ndarray:
    """
    Sparse idiosyncratic covariance D + s s' - diag(s^2).

    D and s are both redrawn on every attempt until the result is positive
    definite. The diagonal equals sigma_i^2 exactly.

    Args:
        params: Calibration constants
        p: Dimension, at least 2
        rng: Random generator
        max_attempts: Upper bound on redraws

    Returns:
        p x p positive definite matrix

    Raises:
        GenerationError: when no attempt produced a PD matrix
    """
    if p < 2:
        raise DomainError(f"p must be at least 2, got {p}")
    if max_attempts < 1:
        raise DomainError(f"max_attempts must be positive, got {max_attempts}")

    for attempt in range(1, max_attempts + 1):
        sd = draw_truncated_gamma(params, p, rng)
        s = draw_sparse_vector(params, p, rng)
        sigma_u = np.outer(s, s)
        np.fill_diagonal(sigma_u, sd ** 2)
        if is_positive_definite(sigma_u):
            logger.debug(f"Sparse error covariance for p={p} accepted after {attempt} attempt(s)")
            return sigma_u

    raise GenerationError(
        f"No positive definite error covariance for p={p} after {max_attempts} attempts",
        attempts=max_attempts,
    )


def innovation_cov(params: CalibrationParams) -> np.ndarray:
    """Sigma_eps = cov_f - Phi cov_f Phi' from the stationarity identity."""
    return symmetrize(params.cov_f - params.phi @ params.cov_f @ params.phi.T)


def stationary_mean(params: CalibrationParams) -> np.ndarray:
    """(I - Phi)^{-1} mu."""
    k = params.n_factors
    return np.linalg.solve(np.eye(k) - params.phi, params.mu_f)


def simulate_var1(
    params: CalibrationParams,
    t: int,
    rng: np.random.Generator,
    burn_in: int = 500,
) -> np.ndarray:
    """
    Simulate f_t = mu + Phi f_{t-1} + eps_t, eps_t ~ N(0, Sigma_eps).

    The chain starts at the stationary mean and runs ``burn_in`` steps before
    recording.

    Returns:
        K x t factor matrix

    Raises:
        CalibrationError: when Phi is not stable or Sigma_eps is not PSD
    """
    if t < 1 or burn_in < 0:
        raise DomainError(f"Need t >= 1 and burn_in >= 0, got t={t}, burn_in={burn_in}")
    radius = spectral_radius(params.phi)
    if radius >= 1.0:
        raise CalibrationError(f"VAR coefficient has spectral radius {radius:.4f} >= 1")
    sigma_eps = innovation_cov(params)
    try:
        root = symmetric_sqrt(sigma_eps, tol=1e-10)
    except DomainError as e:
        raise CalibrationError(
            f"Innovation covariance cov_f - Phi cov_f Phi' is not PSD: {e}"
        ) from e

    k = params.n_factors
    total = t + burn_in
    shocks = rng.standard_normal((total, k)) @ root
    path = np.empty((total, k))
    state = stationary_mean(params)
    for step in range(total):
        state = params.mu_f + params.phi @ state + shocks[step]
        path[step] = state
    return path[burn_in:].T.copy()


def build_ground_truth(
    params: CalibrationParams,
    p: int,
    rng: np.random.Generator,
    max_attempts: int = 1000,
) -> GroundTruth:
    """Draw loadings and the sparse error covariance, and assemble the true Sigma."""
    loadings = draw_loadings(params, p, rng)
    sigma_u = generate_sparse_error_cov(params, p, rng, max_attempts=max_attempts)
    sigma_full = symmetrize(loadings @ params.cov_f @ loadings.T) + sigma_u
    return GroundTruth(
        loadings=loadings,
        sigma_u=sigma_u,
        sigma_full=sigma_full,
        m_t=sparsity_degree(sigma_u),
    )


def generate_panel(
    truth: GroundTruth,
    factors: np.ndarray,
    rng: np.random.Generator,
) -> Panel:
    """y_t = B f_t + u_t with u_t i.i.d. N(0, Sigma_u)."""
    factors = np.atleast_2d(np.asarray(factors, dtype=float))
    if factors.shape[0] != truth.loadings.shape[1]:
        raise DomainError(
            f"Factors have {factors.shape[0]} rows, loadings have {truth.loadings.shape[1]} columns"
        )
    t = factors.shape[1]
    noise = multivariate_normal(rng, np.zeros(truth.p), truth.sigma_u, t).T
    return Panel(y=truth.loadings @ factors + noise, f=factors)


def calibration_report(params: CalibrationParams) -> Dict[str, object]:
    """Numerical consistency facts about a calibration."""
    sigma_eps = innovation_cov(params)
    return {
        "phi_spectral_radius": spectral_radius(params.phi),
        "innovation_cov_eigenvalues": eigenvalues(sigma_eps).tolist(),
        "innovation_cov_pd": is_positive_definite(sigma_eps),
        "sigma_b_pd": is_positive_definite(params.sigma_b),
        "cov_f_pd": is_positive_definite(params.cov_f),
        "stationary_mean": stationary_mean(params).tolist(),
    }


def simulate_market(
    params: CalibrationParams,
    p: int,
    t: int,
    rng: np.random.Generator,
    burn_in: int = 500,
    max_attempts: int = 1000,
) -> Tuple[GroundTruth, Panel]:
    """One full draw: ground truth, VAR factors and the observed panel."""
    truth = build_ground_truth(params, p, rng, max_attempts=max_attempts)
    factors = simulate_var1(params, t, rng, burn_in=burn_in)
    return truth, generate_panel(truth, factors, rng)
