"""Pytest configuration and fixtures."""

import numpy as np
import pytest

from config.settings import reset_settings
from src.factor_regression import Panel


@pytest.fixture(autouse=True)
def mock_env_vars(monkeypatch, tmp_path):
    """Pin environment variables for testing and drop cached settings."""
    monkeypatch.setenv("LOG_LEVEL", "WARNING")
    monkeypatch.delenv("LOG_FILE", raising=False)
    monkeypatch.delenv("FACTORCOV_THREADS", raising=False)
    monkeypatch.delenv("FACTORCOV_THRESHOLD_C", raising=False)
    monkeypatch.setenv("FACTORCOV_OUTPUT_DIR", str(tmp_path / "results"))
    reset_settings()
    yield
    reset_settings()


@pytest.fixture
def rng():
    """Seeded generator."""
    return np.random.default_rng(12345)


@pytest.fixture
def random_spd(rng):
    """Factory for random symmetric positive definite matrices."""
    def make(p: int, ridge: float = 1.0) -> np.ndarray:
        a = rng.standard_normal((p, p))
        return a @ a.T / p + ridge * np.eye(p)
    return make


@pytest.fixture
def planted_panel(rng):
    """Panel y = B f + u with known loadings, p=8, K=2, T=200."""
    p, k, t = 8, 2, 200
    loadings = rng.standard_normal((p, k))
    factors = rng.standard_normal((k, t))
    noise = 0.5 * rng.standard_normal((p, t))
    return Panel(y=loadings @ factors + noise, f=factors), loadings
