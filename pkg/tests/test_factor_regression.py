"""Tests for OLS factor regression."""

import numpy as np
import pytest

from src.exceptions import DomainError, InsufficientDataError, RankDeficiencyError, ShapeError
from src.factor_regression import (
    Panel,
    factor_sample_cov,
    fit_factor_model,
    invert_gram,
    ols_loadings,
    residuals,
    sample_cov,
)
from src.matrix_norms import min_eigenvalue


class TestPanel:
    """Tests for Panel validation."""

    def test_dimensions(self, planted_panel):
        panel, _ = planted_panel
        assert (panel.p, panel.K, panel.T) == (8, 2, 200)

    def test_period_mismatch(self):
        with pytest.raises(ShapeError):
            Panel(y=np.zeros((2, 5)), f=np.zeros((1, 4)))

    def test_too_few_periods(self):
        with pytest.raises(InsufficientDataError):
            Panel(y=np.zeros((2, 3)), f=np.ones((3, 3)))

    def test_non_finite(self):
        y = np.zeros((2, 5))
        y[0, 0] = np.nan
        with pytest.raises(DomainError):
            Panel(y=y, f=np.ones((1, 5)))

    def test_vector_inputs_become_rows(self):
        panel = Panel(y=np.arange(5.0), f=np.ones(5))
        assert panel.y.shape == (1, 5)
        assert panel.f.shape == (1, 5)


class TestOlsLoadings:
    """Tests for OLS loadings."""

    def test_exact_single_factor(self):
        t = np.arange(1.0, 6.0)
        panel = Panel(y=(3.0 * t).reshape(1, -1), f=t.reshape(1, -1))
        loadings = ols_loadings(panel)
        assert loadings[0, 0] == pytest.approx(3.0)
        np.testing.assert_allclose(residuals(panel, loadings), 0.0, atol=1e-12)

    def test_zero_observations(self, rng):
        panel = Panel(y=np.zeros((3, 10)), f=rng.standard_normal((2, 10)))
        np.testing.assert_array_equal(ols_loadings(panel), 0.0)

    def test_recovers_planted_loadings(self, rng):
        b = rng.standard_normal((2, 2))
        f = rng.standard_normal((2, 4))
        panel = Panel(y=b @ f, f=f)
        np.testing.assert_allclose(ols_loadings(panel), b, atol=1e-10)

    def test_normal_equations(self, planted_panel):
        panel, _ = planted_panel
        fit = fit_factor_model(panel)
        np.testing.assert_allclose(panel.f @ fit.residuals.T, 0.0, atol=1e-9)

    def test_collinear_factors(self, rng):
        f1 = rng.standard_normal(10)
        panel = Panel(y=rng.standard_normal((3, 10)), f=np.vstack([f1, 2.0 * f1]))
        with pytest.raises(RankDeficiencyError) as excinfo:
            ols_loadings(panel)
        assert excinfo.value.dimension == 2


class TestResiduals:
    """Tests for residual extraction."""

    def test_zero_loadings(self, planted_panel):
        panel, _ = planted_panel
        np.testing.assert_array_equal(residuals(panel, np.zeros((panel.p, panel.K))), panel.y)

    def test_recovers_orthogonal_noise(self, rng):
        t = 50
        f = rng.standard_normal((2, t))
        raw = rng.standard_normal((3, t))
        # project the noise off the factor row space
        u = raw - raw @ f.T @ np.linalg.solve(f @ f.T, f)
        b = rng.standard_normal((3, 2))
        panel = Panel(y=b @ f + u, f=f)
        np.testing.assert_allclose(residuals(panel, ols_loadings(panel)), u, atol=1e-10)

    def test_wrong_shape(self, planted_panel):
        panel, _ = planted_panel
        with pytest.raises(ShapeError):
            residuals(panel, np.zeros((panel.p + 1, panel.K)))


class TestCovariances:
    """Tests for the factor and sample covariances."""

    def test_constant_factors(self):
        np.testing.assert_allclose(factor_sample_cov(np.full((2, 6), 3.0)), 0.0, atol=1e-12)

    def test_factor_cov_divisor_t(self):
        assert factor_sample_cov(np.array([[-1.0, 1.0]]))[0, 0] == pytest.approx(1.0)

    def test_factor_cov_orthogonal_rows(self):
        f = np.array([[1.0, -1.0, 1.0, -1.0], [1.0, 1.0, -1.0, -1.0]])
        cov = factor_sample_cov(f)
        assert cov[0, 1] == pytest.approx(0.0)
        assert cov[0, 0] == pytest.approx(1.0)

    def test_sample_cov_divisor(self):
        assert sample_cov(np.array([[0.0, 2.0]]))[0, 0] == pytest.approx(2.0)

    def test_sample_cov_constant(self):
        np.testing.assert_allclose(sample_cov(np.full((3, 5), 7.0)), 0.0, atol=1e-12)

    def test_sample_cov_duplicated_rows(self, rng):
        row = rng.standard_normal(20)
        cov = sample_cov(np.vstack([row, row]))
        assert min_eigenvalue(cov) == pytest.approx(0.0, abs=1e-12)

    def test_single_period(self):
        with pytest.raises(InsufficientDataError):
            sample_cov(np.ones((2, 1)))
        with pytest.raises(InsufficientDataError):
            factor_sample_cov(np.ones((1, 1)))

    def test_symmetric(self, planted_panel):
        panel, _ = planted_panel
        cov = sample_cov(panel.y)
        np.testing.assert_array_equal(cov, cov.T)


class TestInvertGram:
    """Tests for Gram inversion."""

    def test_inverse(self):
        np.testing.assert_allclose(invert_gram(np.diag([2.0, 4.0])), np.diag([0.5, 0.25]))

    def test_equation_index_carried(self):
        with pytest.raises(RankDeficiencyError) as excinfo:
            invert_gram(np.ones((2, 2)), equation=3)
        assert excinfo.value.equation == 3
