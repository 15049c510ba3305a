"""Pytest configuration and fixtures."""

import numpy as np
import pytest

from mvmilstein.config import Settings
from mvmilstein.sde.measure import EmpiricalMeasureView
from mvmilstein.sde.model import (
    BuiltinModelParams,
    BuiltinName,
    McKeanVlasovModel,
    make_builtin,
)


def constant_model(
    drift: float = 0.0, diffusion: float = 0.0, gradient: float = 0.0, name: str = "constant"
) -> McKeanVlasovModel:
    """Model with constant coefficients and no measure dependence."""

    def _drift(x, _mu):
        return np.full(np.shape(x), drift)

    def _diffusion(x, _mu):
        return np.full(np.shape(x), diffusion)

    def _gradient(x, _mu):
        return np.full(np.shape(x), gradient)

    def _lions(x, _mu, probe):
        return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(probe)))

    return McKeanVlasovModel(
        name=name,
        drift=_drift,
        diffusion=_diffusion,
        diffusion_state_gradient=_gradient,
        diffusion_lions_derivative=_lions,
        initial_value=1.0,
    )


def linear_ode_model(a: float, x0: float = 1.0) -> McKeanVlasovModel:
    """Deterministic dX = a X dt."""

    def _drift(x, _mu):
        return a * np.asarray(x, dtype=np.float64)

    def _zero(x, _mu):
        return np.zeros(np.shape(x))

    def _lions(x, _mu, probe):
        return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(probe)))

    return McKeanVlasovModel(
        name=f"ode(a={a})",
        drift=_drift,
        diffusion=_zero,
        diffusion_state_gradient=_zero,
        diffusion_lions_derivative=_lions,
        initial_value=x0,
    )


def geometric_model(mu_coef: float, sigma_coef: float, x0: float = 1.0) -> McKeanVlasovModel:
    """Measure-free geometric Brownian motion dX = m X dt + s X dW."""

    def _drift(x, _mu):
        return mu_coef * np.asarray(x, dtype=np.float64)

    def _diffusion(x, _mu):
        return sigma_coef * np.asarray(x, dtype=np.float64)

    def _gradient(x, _mu):
        return np.full(np.shape(x), sigma_coef)

    def _lions(x, _mu, probe):
        return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(probe)))

    return McKeanVlasovModel(
        name="gbm",
        drift=_drift,
        diffusion=_diffusion,
        diffusion_state_gradient=_gradient,
        diffusion_lions_derivative=_lions,
        initial_value=x0,
    )


@pytest.fixture
def params():
    """Default built-in parameters (sigma = 1.5, c = 0.5, X0 = 1)."""
    return BuiltinModelParams()


@pytest.fixture
def ex1(params):
    """Example 1: diffusion equal to the mean."""
    return make_builtin(BuiltinName.EX1, params)


@pytest.fixture
def ex2(params):
    """Example 2: multiplicative noise."""
    return make_builtin(BuiltinName.EX2, params)


@pytest.fixture
def ex3(params):
    """Example 3: sine convolution."""
    return make_builtin(BuiltinName.EX3, params)


@pytest.fixture
def sample_view():
    """A small measure with distinct atoms."""
    return EmpiricalMeasureView.of([-1.0, 0.0, 0.5, 2.0])


@pytest.fixture
def test_settings():
    """Settings with small, fast defaults."""
    return Settings(
        _env_file=None,  # type: ignore[call-arg]
        seed=7,
        particles=64,
        particles_small_model=16,
        workers=1,
    )


@pytest.fixture
def make_constant_model():
    """Factory for constant-coefficient models."""
    return constant_model


@pytest.fixture
def make_linear_ode():
    """Factory for deterministic linear ODE models."""
    return linear_ode_model


@pytest.fixture
def make_geometric_model():
    """Factory for measure-free geometric Brownian motions."""
    return geometric_model
