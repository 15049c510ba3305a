"""Tests for the model interface, drift taming and the built-in models."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvmilstein.exceptions import InvalidInputError
from mvmilstein.sde.measure import (
    EmpiricalMeasureView,
    double_integrate,
    integrate,
    saturating,
    variance_of,
)
from mvmilstein.sde.model import (
    BUILTIN_NAMES,
    BuiltinModelParams,
    BuiltinName,
    TamingVariant,
    builtin_from_name,
    linear_meanfield_model,
    make_builtin,
    probe_assumptions,
    tame_drift,
)

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)
steps = st.floats(min_value=1e-6, max_value=1.0)


class TestTameDrift:
    """Tests for drift taming."""

    def test_scheme1_example(self):
        """Test b / (1 + delta |b|) on the hand-evaluated Example 1 drift."""
        assert tame_drift(0.625, 0.5, TamingVariant.SCHEME1) == pytest.approx(0.47619047619047616)

    def test_scheme2_example(self):
        """Test b / (1 + delta b^2)."""
        expected = 0.625 / (1.0 + 0.5 * 0.625**2)
        assert tame_drift(0.625, 0.5, TamingVariant.SCHEME2) == pytest.approx(expected)

    def test_none_is_identity(self):
        """Test that no taming leaves the drift unchanged."""
        assert tame_drift(-123.5, 0.1, TamingVariant.NONE) == -123.5

    def test_scalar_in_scalar_out(self):
        """Test that a scalar input gives a Python float."""
        assert isinstance(tame_drift(1.0, 0.1, TamingVariant.SCHEME1), float)

    def test_array_input(self):
        """Test element-wise taming of an array."""
        out = tame_drift(np.array([0.0, 2.0, -2.0]), 0.5, TamingVariant.SCHEME1)
        np.testing.assert_allclose(out, [0.0, 1.0, -1.0])

    @pytest.mark.parametrize("delta", [0.0, -0.1, math.inf, math.nan])
    def test_invalid_delta(self, delta):
        """Test that a non-positive or non-finite step is rejected."""
        with pytest.raises(InvalidInputError):
            tame_drift(1.0, delta, TamingVariant.SCHEME1)

    def test_non_finite_drift(self):
        """Test that a non-finite drift is rejected."""
        with pytest.raises(InvalidInputError):
            tame_drift(math.inf, 0.1, TamingVariant.SCHEME1)

    @given(b=finite, delta=steps)
    def test_scheme1_bounded_by_inverse_step(self, b, delta):
        """Test |tamed| <= 1 / delta for Scheme 1."""
        assert abs(tame_drift(b, delta, TamingVariant.SCHEME1)) <= 1.0 / delta * (1 + 1e-12)

    @given(b=finite, delta=steps)
    def test_taming_preserves_sign_and_shrinks(self, b, delta):
        """Test that taming keeps the sign and never increases the magnitude."""
        for variant in (TamingVariant.SCHEME1, TamingVariant.SCHEME2):
            tamed = tame_drift(b, delta, variant)
            assert abs(tamed) <= abs(b)
            assert tamed * b >= 0

    @given(b=finite, delta=steps)
    def test_scheme2_bounded_by_inverse_root_step(self, b, delta):
        """Test |tamed| <= 1 / sqrt(delta) for Scheme 2."""
        assert abs(tame_drift(b, delta, TamingVariant.SCHEME2)) <= (1.0 / math.sqrt(delta)) * (1 + 1e-12)

    @given(b=finite, delta=steps)
    def test_taming_error_shrinks_with_step(self, b, delta):
        """Test |tamed - b| <= delta b^2 for Scheme 1 and <= delta |b|^3 for Scheme 2."""
        rounding = 4 * math.ulp(b)
        gap1 = abs(tame_drift(b, delta, TamingVariant.SCHEME1) - b)
        gap2 = abs(tame_drift(b, delta, TamingVariant.SCHEME2) - b)
        assert gap1 <= delta * b * b * (1 + 1e-12) + rounding
        assert gap2 <= delta * abs(b) ** 3 * (1 + 1e-12) + rounding


class TestBuiltinModels:
    """Tests for the five benchmark models."""

    def test_registry(self):
        """Test that all five identifiers are registered."""
        assert BUILTIN_NAMES == ("ex1", "ex2", "ex3", "ex4", "ex5")

    def test_builtin_from_name_case_insensitive(self):
        """Test name resolution ignores case."""
        assert builtin_from_name("EX2").name == "ex2"

    def test_builtin_from_name_unknown(self):
        """Test that unknown names are rejected."""
        with pytest.raises(InvalidInputError, match="ex6"):
            builtin_from_name("ex6")

    def test_ex1_drift_at_initial_state(self, ex1):
        """Test b(1, delta_1) = 0.5 sigma^2 - 1 + c = 0.625."""
        view = EmpiricalMeasureView.of([1.0, 1.0])
        np.testing.assert_allclose(ex1.drift(np.array([1.0, 1.0]), view), [0.625, 0.625])

    def test_ex1_diffusion_is_mean(self, ex1, sample_view):
        """Test that the Example 1 diffusion equals the empirical mean."""
        out = ex1.diffusion(np.array([3.0, -7.0]), sample_view)
        np.testing.assert_allclose(out, [0.375, 0.375])

    def test_ex2_gradient(self, ex2, sample_view):
        """Test that sigma(x) = x has unit gradient."""
        np.testing.assert_array_equal(ex2.diffusion_state_gradient(np.array([2.0, -1.0]), sample_view), [1.0, 1.0])

    def test_ex3_drift_matches_direct_integral(self, ex3, sample_view):
        """Test that the factored sine convolution equals the direct average."""
        x = 0.3
        direct = integrate(sample_view, lambda y: np.sin(x - y))
        cubic = 0.5 * 1.5**2 * x - x**3
        assert float(ex3.drift(np.array([x]), sample_view)[0]) == pytest.approx(cubic + direct, abs=1e-14)

    def test_ex4_diffusion_matches_double_integral(self, params, sample_view):
        """Test that 2 E[sin] E[cos] equals the double integral of sin(u + v)."""
        model = make_builtin(BuiltinName.EX4, params)
        direct = double_integrate(sample_view, lambda u, v: np.sin(u + v))
        assert float(model.diffusion(np.array([0.0]), sample_view)[0]) == pytest.approx(direct, abs=1e-14)

    def test_ex5_diffusion_matches_variance(self, params, sample_view):
        """Test that sigma = exp(-Var g) with g(u) = u / (1 + u^2)."""
        model = make_builtin(BuiltinName.EX5, params)
        expected = math.exp(-variance_of(sample_view, saturating))
        assert float(model.diffusion(np.array([0.0]), sample_view)[0]) == pytest.approx(expected, abs=1e-14)

    @pytest.mark.parametrize("name", [BuiltinName.EX1, BuiltinName.EX4, BuiltinName.EX5])
    def test_diffusion_constant_in_state(self, params, sample_view, name):
        """Test that the diffusion depends on the measure only, with a zero state gradient."""
        model = make_builtin(name, params)
        x = np.array([-3.0, 0.0, 2.5, 100.0])
        out = model.diffusion(x, sample_view)
        assert np.unique(out).size == 1
        np.testing.assert_array_equal(model.diffusion_state_gradient(x, sample_view), np.zeros(4))

    @settings(deadline=None)
    @given(data=st.data(), name=st.sampled_from(list(BuiltinName)))
    def test_coefficients_follow_particle_permutation(self, data, name):
        """Test that shuffling particles shuffles drift and diffusion the same way."""
        values = data.draw(
            st.lists(st.floats(min_value=-5.0, max_value=5.0, allow_nan=False), min_size=1, max_size=8)
        )
        order = np.array(data.draw(st.permutations(range(len(values)))), dtype=np.intp)
        model = make_builtin(name, BuiltinModelParams())
        x = np.array(values)
        view = EmpiricalMeasureView.of(x)
        shuffled = EmpiricalMeasureView.of(x[order])
        for coefficient in (model.drift, model.diffusion):
            np.testing.assert_allclose(
                coefficient(x[order], shuffled), coefficient(x, view)[order], rtol=1e-12, atol=1e-12
            )

    def test_lions_shape(self, ex3, sample_view):
        """Test that (N, 1) states against (1, N) probes give an (N, N) matrix."""
        x = sample_view.samples
        out = ex3.diffusion_lions_derivative(x[:, None], sample_view, x[None, :])
        assert out.shape == (4, 4)
        np.testing.assert_allclose(np.diag(out), -np.ones(4))

    @pytest.mark.parametrize("name", [BuiltinName.EX1, BuiltinName.EX3, BuiltinName.EX4, BuiltinName.EX5])
    def test_lions_derivative_by_finite_differences(self, params, name):
        """Test N d sigma / d x_j against the closed-form Lions derivative at x_j."""
        model = make_builtin(name, params)
        atoms = np.array([-0.7, 0.2, 0.9, 1.6])
        x = np.array([0.4])
        h = 1e-6
        for j in range(atoms.size):
            up, down = atoms.copy(), atoms.copy()
            up[j] += h
            down[j] -= h
            numeric = (
                float(model.diffusion(x, EmpiricalMeasureView.of(up))[0])
                - float(model.diffusion(x, EmpiricalMeasureView.of(down))[0])
            ) / (2 * h) * atoms.size
            closed = float(
                model.diffusion_lions_derivative(x, EmpiricalMeasureView.of(atoms), np.array([atoms[j]]))[0]
            )
            assert numeric == pytest.approx(closed, abs=1e-6)

    def test_params_validation(self):
        """Test that sigma must be positive."""
        with pytest.raises(ValueError):
            BuiltinModelParams(sigma_param=0.0)


class TestLinearMeanfieldModel:
    """Tests for the mean-field Ornstein-Uhlenbeck model."""

    def test_drift_and_diffusion(self, sample_view):
        """Test b = a x + c E[x] and sigma = s."""
        model = linear_meanfield_model(-1.0, 0.5, 0.3, 2.0)
        x = np.array([1.0, 2.0])
        np.testing.assert_allclose(model.drift(x, sample_view), [-1.0 + 0.1875, -2.0 + 0.1875])
        np.testing.assert_array_equal(model.diffusion(x, sample_view), [0.3, 0.3])
        assert model.initial_value == 2.0

    def test_rejects_non_finite(self):
        """Test that non-finite parameters are rejected."""
        with pytest.raises(InvalidInputError):
            linear_meanfield_model(math.nan, 0.0, 1.0, 0.0)


class TestProbeAssumptions:
    """Tests for the one-sided Lipschitz probe."""

    def test_ex2_within_tolerance(self, ex2, sample_view):
        """Test that Example 2 satisfies both conditions with constant 2."""
        report = probe_assumptions(ex2, [-2.0, -1.0, 0.0, 1.0, 2.0], [sample_view], tolerance=2.0)
        assert report.violations == []
        assert len(report.pairs) == 10
        assert report.max_one_sided_ratio <= 1.125
        assert report.max_lipschitz_ratio == pytest.approx(1.0)

    def test_tight_tolerance_flags_diffusion(self, ex2, sample_view):
        """Test that a tolerance below the diffusion constant flags every pair."""
        report = probe_assumptions(ex2, [0.0, 1.0, 3.0], [sample_view], tolerance=0.5)
        assert len(report.violations) == 3

    def test_equal_states_are_skipped(self, ex2, sample_view):
        """Test that coincident states are counted as skipped."""
        report = probe_assumptions(ex2, [1.0, 1.0, 2.0], [sample_view], tolerance=2.0)
        assert report.skipped_pairs == 1
        assert len(report.pairs) == 2

    def test_needs_two_states(self, ex2, sample_view):
        """Test that a single state is rejected."""
        with pytest.raises(InvalidInputError):
            probe_assumptions(ex2, [1.0], [sample_view], tolerance=1.0)
