"""Tests for SUR estimation and feasible GLS."""

import numpy as np
import pytest

from src.adaptive_threshold import residual_moments
from src.exceptions import DomainError, RankDeficiencyError, ShapeError
from src.sur_gls import (
    METHOD_FEASIBLE_GLS,
    METHOD_OLS,
    SurEquation,
    SurModel,
    feasible_gls,
    run_feasible_gls,
    stacked_gls_dense,
    sur_ols,
    sur_threshold,
)


def planted_system(rng, sizes, t, error_cov=None, noise_scale=1.0):
    """Build a SUR model with random regressors and known coefficients."""
    p = len(sizes)
    coefficients = [rng.standard_normal(k) for k in sizes]
    if error_cov is None:
        errors = np.zeros((p, t))
    else:
        errors = noise_scale * np.linalg.cholesky(error_cov) @ rng.standard_normal((p, t))
    equations = []
    for i, k in enumerate(sizes):
        x = rng.standard_normal((t, k))
        equations.append(SurEquation(y=x @ coefficients[i] + errors[i], x=x))
    return SurModel(equations=tuple(equations)), coefficients


def equicorrelated(p: int, rho: float) -> np.ndarray:
    return (1.0 - rho) * np.eye(p) + rho * np.ones((p, p))


class TestSurModel:
    """Tests for SUR model validation."""

    def test_vector_regressor(self, rng):
        eq = SurEquation(y=rng.standard_normal(10), x=rng.standard_normal(10))
        assert eq.k == 1

    def test_mismatched_rows(self):
        with pytest.raises(ShapeError):
            SurEquation(y=np.zeros(10), x=np.zeros((9, 2)))

    def test_mismatched_periods(self, rng):
        a = SurEquation(y=np.zeros(10), x=rng.standard_normal((10, 1)))
        b = SurEquation(y=np.zeros(12), x=rng.standard_normal((12, 1)))
        with pytest.raises(ShapeError):
            SurModel(equations=(a, b))

    def test_too_many_regressors(self, rng):
        eq = SurEquation(y=np.zeros(3), x=rng.standard_normal((3, 3)))
        with pytest.raises(ShapeError):
            SurModel(equations=(eq,))

    def test_empty(self):
        with pytest.raises(ShapeError):
            SurModel(equations=())

    def test_properties(self, rng):
        model, _ = planted_system(rng, [1, 3, 2], 20)
        assert (model.p, model.T, model.k_max) == (3, 20, 3)
        assert model.block_sizes == [1, 3, 2]


class TestSurOls:
    """Tests for equation-by-equation OLS."""

    def test_shared_regressors(self, rng):
        x = rng.standard_normal((30, 2))
        betas = [rng.standard_normal(2) for _ in range(3)]
        model = SurModel(equations=tuple(SurEquation(y=x @ b, x=x) for b in betas))
        fit = sur_ols(model)
        for got, want in zip(fit.coefficients, betas):
            np.testing.assert_allclose(got, want, atol=1e-10)
        assert fit.method == METHOD_OLS

    def test_zero_response(self, rng):
        model = SurModel(equations=(
            SurEquation(y=np.zeros(15), x=rng.standard_normal((15, 2))),
            SurEquation(y=np.zeros(15), x=rng.standard_normal((15, 1))),
        ))
        np.testing.assert_allclose(sur_ols(model).coefficient_vector, 0.0, atol=1e-12)

    def test_unequal_blocks(self, rng):
        model, coefficients = planted_system(rng, [1, 2], 12)
        fit = sur_ols(model)
        for got, want in zip(fit.coefficients, coefficients):
            np.testing.assert_allclose(got, want, atol=1e-10)
        assert fit.residuals.shape == (2, 12)

    def test_rank_deficient_equation(self, rng):
        a = rng.standard_normal(10)
        good = SurEquation(y=rng.standard_normal(10), x=rng.standard_normal((10, 2)))
        bad = SurEquation(y=rng.standard_normal(10), x=np.column_stack([a, 2.0 * a]))
        with pytest.raises(RankDeficiencyError) as excinfo:
            sur_ols(SurModel(equations=(good, bad)))
        assert excinfo.value.equation == 1


class TestSurThreshold:
    """Tests for thresholding the SUR residual covariance."""

    def test_huge_constant_is_diagonal(self, rng):
        model, _ = planted_system(rng, [2, 2, 2, 2], 60, error_cov=equicorrelated(4, 0.5))
        result = sur_threshold(sur_ols(model), 1e6, model.p, model.T)
        assert result.offdiag_kept == 0

    def test_tiny_constant_keeps_everything(self, rng):
        model, _ = planted_system(rng, [2, 2, 2, 2], 60, error_cov=equicorrelated(4, 0.5))
        fit = sur_ols(model)
        result = sur_threshold(fit, 1e-12, model.p, model.T)
        np.testing.assert_array_equal(result.matrix, residual_moments(fit.residuals).sigma_hat)

    def test_block_support_recovery(self):
        """Keeps the planted block support and drops at least 90% of the true zeros."""
        rng = np.random.default_rng(2024)
        p, t, k = 20, 2000, 12
        cov = np.eye(p)
        for start in range(0, p, 2):
            cov[start, start + 1] = cov[start + 1, start] = 0.5
        model, _ = planted_system(rng, [k] * p, t, error_cov=cov)
        result = sur_threshold(sur_ols(model), 0.10, p, t)

        true_support = cov != 0.0
        assert np.all(result.kept_mask[true_support])
        off = ~true_support
        excluded = np.sum(~result.kept_mask[off]) / np.sum(off)
        assert excluded >= 0.90


class TestFeasibleGls:
    """Tests for feasible GLS."""

    def test_identity_precision_is_ols(self, rng):
        model, _ = planted_system(rng, [1, 3, 2], 40, error_cov=equicorrelated(3, 0.4))
        gls = feasible_gls(model, np.eye(3))
        ols = sur_ols(model)
        np.testing.assert_allclose(gls.coefficient_vector, ols.coefficient_vector, atol=1e-10)
        assert gls.method == METHOD_FEASIBLE_GLS

    def test_dense_oracle(self, rng):
        cov = np.array([[1.0, 0.6], [0.6, 2.0]])
        model, _ = planted_system(rng, [2, 3], 50, error_cov=cov)
        precision = np.linalg.inv(cov)
        block = feasible_gls(model, precision).coefficient_vector
        np.testing.assert_allclose(block, stacked_gls_dense(model, precision), atol=1e-10)

    def test_dense_oracle_random_systems(self, rng, random_spd):
        for _ in range(10):
            p = int(rng.integers(2, 6))
            t = int(rng.integers(10, 500 // p))
            sizes = [int(k) for k in rng.integers(1, 4, size=p)]
            cov = random_spd(p)
            model, _ = planted_system(rng, sizes, t, error_cov=cov)
            precision = np.linalg.inv(cov)
            np.testing.assert_allclose(
                feasible_gls(model, precision).coefficient_vector,
                stacked_gls_dense(model, precision),
                atol=1e-8,
            )

    def test_literal_weight_uses_covariance(self, rng):
        cov = np.array([[1.0, 0.6], [0.6, 2.0]])
        model, _ = planted_system(rng, [2, 1], 40, error_cov=cov)
        precision = np.linalg.inv(cov)
        literal = feasible_gls(model, precision, literal_weight=True).coefficient_vector
        np.testing.assert_allclose(literal, stacked_gls_dense(model, cov), atol=1e-8)

    def test_noise_free_recovery(self, rng, random_spd):
        model, coefficients = planted_system(rng, [2, 1, 3], 25)
        fit = feasible_gls(model, np.linalg.inv(random_spd(3)))
        np.testing.assert_allclose(fit.coefficient_vector, np.concatenate(coefficients), atol=1e-10)

    def test_identical_regressors_degenerate_to_ols(self, rng, random_spd):
        x = rng.standard_normal((40, 3))
        errors = rng.standard_normal((4, 40))
        model = SurModel(equations=tuple(
            SurEquation(y=x @ rng.standard_normal(3) + errors[i], x=x) for i in range(4)
        ))
        gls = feasible_gls(model, np.linalg.inv(random_spd(4)))
        np.testing.assert_allclose(gls.coefficient_vector, sur_ols(model).coefficient_vector, atol=1e-8)

    def test_non_pd_precision(self, rng):
        model, _ = planted_system(rng, [1, 1], 10)
        with pytest.raises(DomainError):
            feasible_gls(model, np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_precision_shape(self, rng):
        model, _ = planted_system(rng, [1, 1], 10)
        with pytest.raises(ShapeError):
            feasible_gls(model, np.eye(3))

    def test_efficiency_against_ols(self):
        """GLS with the true precision has lower mean squared coefficient error than OLS."""
        rng = np.random.default_rng(99)
        p, t = 20, 100
        cov = equicorrelated(p, 0.7)
        precision = np.linalg.inv(cov)
        gls_err, ols_err = [], []
        for _ in range(200):
            model, coefficients = planted_system(rng, [2] * p, t, error_cov=cov)
            truth = np.concatenate(coefficients)
            gls_err.append(np.mean((feasible_gls(model, precision).coefficient_vector - truth) ** 2))
            ols_err.append(np.mean((sur_ols(model).coefficient_vector - truth) ** 2))
        assert np.mean(gls_err) <= np.mean(ols_err)


class TestRunFeasibleGls:
    """Tests for the two-stage pipeline."""

    def test_pipeline(self, rng):
        model, coefficients = planted_system(rng, [2, 2, 1], 200, error_cov=equicorrelated(3, 0.5))
        ols_fit, thresholded, gls_fit = run_feasible_gls(model, threshold_c=0.10)
        assert ols_fit.method == METHOD_OLS
        assert gls_fit.method == METHOD_FEASIBLE_GLS
        assert gls_fit.residual_cov is thresholded
        assert thresholded.omega > 0
        np.testing.assert_allclose(gls_fit.coefficient_vector, np.concatenate(coefficients), atol=0.3)
