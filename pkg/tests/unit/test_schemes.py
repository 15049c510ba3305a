"""Tests for time grids, scheme selection and the particle steppers."""

import numpy as np
import pytest

from mvmilstein.exceptions import InvalidInputError, SimulationDivergedError
from mvmilstein.sde.model import TamingVariant
from mvmilstein.sde.noise import (
    LevyAreaConfig,
    NoiseBlock,
    sample_increments,
    sample_noise_block,
    zero_noise_block,
)
from mvmilstein.sde.schemes import (
    EnsembleState,
    SchemeKind,
    SchemeSpec,
    TimeGrid,
    ensemble_moment,
    simulate_coupled_pair,
    simulate_path,
    simulate_terminal,
    step_ensemble,
    summarize_path,
    summarize_state,
)


def _permuted(block: NoiseBlock, order: np.ndarray) -> NoiseBlock:
    cross = None
    if block.cross_iterated is not None:
        cross = block.cross_iterated[np.ix_(order, order)]
    return NoiseBlock(
        delta=block.delta,
        increments=block.increments[order],
        diagonal_iterated=block.diagonal_iterated[order],
        cross_iterated=cross,
    )


class TestTimeGrid:
    """Tests for the uniform time grid."""

    def test_delta(self):
        """Test delta = T / M."""
        assert TimeGrid(horizon=1.0, steps=8).delta == 0.125

    def test_last_node_is_horizon(self):
        """Test that t_M equals T exactly even when M * delta rounds."""
        grid = TimeGrid(horizon=0.3, steps=3)
        assert grid.node(3) == 0.3
        assert grid.node(0) == 0.0

    @pytest.mark.parametrize("n", [-1, 5])
    def test_node_out_of_range(self, n):
        """Test that indices outside 0..M are rejected."""
        with pytest.raises(InvalidInputError):
            TimeGrid(horizon=1.0, steps=4).node(n)

    def test_coarsened(self):
        """Test that coarsening halves M and keeps T."""
        coarse = TimeGrid(horizon=2.0, steps=8).coarsened()
        assert coarse.steps == 4
        assert coarse.delta == 0.5

    def test_coarsen_odd_rejected(self):
        """Test that an odd grid cannot be coarsened."""
        with pytest.raises(InvalidInputError):
            TimeGrid(horizon=1.0, steps=5).coarsened()

    @pytest.mark.parametrize("kwargs", [{"horizon": 0.0, "steps": 4}, {"horizon": 1.0, "steps": 0}])
    def test_validation(self, kwargs):
        """Test that T and M must be positive."""
        with pytest.raises(ValueError):
            TimeGrid(**kwargs)


class TestSchemeSpec:
    """Tests for scheme selection."""

    def test_euler_forces_flags_off(self):
        """Test that tamed Euler never carries Milstein terms."""
        spec = SchemeSpec(
            kind=SchemeKind.TAMED_EULER, include_state_gradient_term=True, include_lions_term=True
        )
        assert not spec.include_state_gradient_term
        assert not spec.include_lions_term

    def test_euler_from_string_kind(self):
        """Test that the flag override also applies to a string kind."""
        spec = SchemeSpec.model_validate({"kind": "tamed-euler", "include_lions_term": True})
        assert spec.kind is SchemeKind.TAMED_EULER
        assert not spec.include_lions_term

    def test_constructors(self):
        """Test the named constructors."""
        milstein = SchemeSpec.tamed_milstein(TamingVariant.SCHEME2, lions=False)
        assert milstein.taming is TamingVariant.SCHEME2
        assert milstein.include_state_gradient_term
        assert not milstein.include_lions_term
        standard = SchemeSpec.standard_milstein()
        assert standard.taming is TamingVariant.NONE
        assert standard.include_lions_term

    def test_labels(self):
        """Test the log labels."""
        assert SchemeSpec.tamed_euler().label == "tamed-euler[s1]"
        assert SchemeSpec.tamed_milstein().label == "milstein[s1]+lions"


class TestEnsembleState:
    """Tests for ensemble slices."""

    def test_initial(self, ex1):
        """Test that X0 is replicated over N particles at node 0."""
        state = EnsembleState.initial(ex1, TimeGrid(horizon=1.0, steps=4), 3)
        np.testing.assert_array_equal(state.positions, [1.0, 1.0, 1.0])
        assert state.size == 3
        assert state.time == 0.0

    def test_read_only(self):
        """Test that positions cannot be modified."""
        state = EnsembleState(np.array([1.0, 2.0]), 0, TimeGrid(horizon=1.0, steps=2))
        with pytest.raises(ValueError):
            state.positions[0] = 0.0

    def test_empty_rejected(self, ex1):
        """Test that N must be positive."""
        with pytest.raises(InvalidInputError):
            EnsembleState.initial(ex1, TimeGrid(horizon=1.0, steps=2), 0)

    def test_moments(self):
        """Test the absolute moment and the node summary."""
        state = EnsembleState(np.array([1.0, -2.0]), 2, TimeGrid(horizon=1.0, steps=4))
        assert ensemble_moment(state, 4) == 8.5
        summary = summarize_state(state)
        assert summary.step == 2
        assert summary.time == 0.5
        assert summary.mean == pytest.approx(-0.5)
        assert summary.second_moment == pytest.approx(2.5)
        assert summary.max_abs == 2.0


class TestStepEnsemble:
    """Tests for a single step."""

    def test_ex1_tamed_euler_step(self, ex1):
        """Test one tamed step of Example 1 from X0 = 1 under zero noise."""
        grid = TimeGrid(horizon=0.5, steps=1)
        state = EnsembleState.initial(ex1, grid, 2)
        out = step_ensemble(state, ex1, SchemeSpec.tamed_milstein(lions=False), zero_noise_block(2, 0.5))
        np.testing.assert_allclose(out.positions, [1.2380952380952381] * 2, rtol=1e-15)
        assert out.step_index == 1

    def test_ex1_lions_term_under_zero_noise(self, ex1):
        """Test that the Lions term adds (1/N) sigma(mu) (-delta / 2) from the diagonal."""
        grid = TimeGrid(horizon=0.5, steps=1)
        state = EnsembleState.initial(ex1, grid, 2)
        noise = zero_noise_block(2, 0.5, with_cross=True)
        out = step_ensemble(state, ex1, SchemeSpec.tamed_milstein(lions=True), noise)
        np.testing.assert_allclose(out.positions, [1.2380952380952381 - 0.125] * 2, rtol=1e-15)

    def test_ex1_lions_term_has_zero_mean(self, ex1):
        """Test that the Example 1 Lions contribution averages to zero over seeded steps."""
        grid = TimeGrid(horizon=1.0, steps=4)
        n, repetitions = 8, 2000
        state = EnsembleState.initial(ex1, grid, n)
        config = LevyAreaConfig(truncation_terms=4)
        with_lions = SchemeSpec.tamed_milstein(lions=True)
        without_lions = SchemeSpec.tamed_milstein(lions=False)

        averages = []
        for rep in range(repetitions):
            noise = sample_noise_block(41, rep, n, grid.delta, config)
            gap = (
                step_ensemble(state, ex1, with_lions, noise).positions
                - step_ensemble(state, ex1, without_lions, noise).positions
            )
            # D^L sigma = 1 and sigma(mu) = E[X] = 1 at the initial slice
            np.testing.assert_allclose(gap, noise.cross_iterated.sum(axis=0) / n, rtol=1e-10, atol=1e-14)
            averages.append(gap.mean())

        values = np.array(averages)
        assert abs(values.mean()) < 4 * values.std() / np.sqrt(repetitions)
        assert abs(values.mean()) < 1.0 / np.sqrt(repetitions)

    def test_state_gradient_term_under_zero_noise(self, make_constant_model):
        """Test that grad sigma * sigma * (-delta / 2) is added with no drift."""
        model = make_constant_model(diffusion=2.0, gradient=3.0)
        grid = TimeGrid(horizon=0.5, steps=1)
        state = EnsembleState(np.array([0.0, 4.0]), 0, grid)
        out = step_ensemble(state, model, SchemeSpec.tamed_milstein(lions=False), zero_noise_block(2, 0.5))
        np.testing.assert_allclose(out.positions, [-1.5, 2.5])

    def test_euler_ignores_iterated_integrals(self, make_constant_model):
        """Test that tamed Euler uses only the increments."""
        model = make_constant_model(diffusion=2.0, gradient=3.0)
        grid = TimeGrid(horizon=0.5, steps=1)
        state = EnsembleState(np.array([1.0]), 0, grid)
        out = step_ensemble(state, model, SchemeSpec.tamed_euler(), zero_noise_block(1, 0.5, with_cross=True))
        assert out.positions[0] == 1.0

    def test_ex3_single_particle_by_hand(self, ex3):
        """Test the full Milstein step of Example 3 for N = 1 against a hand evaluation."""
        delta, w = 0.25, 0.3
        d = (w * w - delta) / 2.0
        noise = NoiseBlock(
            delta=delta,
            increments=np.array([w]),
            diagonal_iterated=np.array([d]),
            cross_iterated=np.array([[d]]),
        )
        state = EnsembleState.initial(ex3, TimeGrid(horizon=0.25, steps=1), 1)
        out = step_ensemble(state, ex3, SchemeSpec.tamed_milstein(lions=True), noise)
        # drift 0.125, sigma 1, grad sigma 2, Lions derivative -1 at X = 1
        expected = 1.0 + 0.125 / (1.0 + delta * 0.125) * delta + w + 2.0 * d - d
        assert out.positions[0] == pytest.approx(expected, rel=1e-14)

    def test_permutation_equivariance(self, ex3):
        """Test that permuting particles and their noise permutes the output."""
        grid = TimeGrid(horizon=1.0, steps=8)
        positions = np.array([0.9, -0.4, 1.3, 0.1, -1.1])
        noise = sample_noise_block(3, 0, 5, grid.delta, LevyAreaConfig(truncation_terms=3))
        order = np.array([3, 0, 4, 2, 1])
        spec = SchemeSpec.tamed_milstein(lions=True)

        out = step_ensemble(EnsembleState(positions, 0, grid), ex3, spec, noise)
        permuted = step_ensemble(
            EnsembleState(positions[order], 0, grid), ex3, spec, _permuted(noise, order)
        )
        np.testing.assert_allclose(permuted.positions, out.positions[order], rtol=1e-12, atol=1e-14)

    def test_delta_mismatch(self, ex1):
        """Test that noise for another step size is rejected."""
        state = EnsembleState.initial(ex1, TimeGrid(horizon=1.0, steps=4), 2)
        with pytest.raises(InvalidInputError):
            step_ensemble(state, ex1, SchemeSpec.tamed_euler(), zero_noise_block(2, 0.5))

    def test_size_mismatch(self, ex1):
        """Test that noise for another ensemble size is rejected."""
        state = EnsembleState.initial(ex1, TimeGrid(horizon=1.0, steps=4), 2)
        with pytest.raises(InvalidInputError):
            step_ensemble(state, ex1, SchemeSpec.tamed_euler(), zero_noise_block(3, 0.25))

    def test_lions_needs_cross_integrals(self, ex1):
        """Test that the Lions term refuses a block without cross integrals."""
        state = EnsembleState.initial(ex1, TimeGrid(horizon=1.0, steps=4), 2)
        with pytest.raises(InvalidInputError):
            step_ensemble(state, ex1, SchemeSpec.tamed_milstein(lions=True), zero_noise_block(2, 0.25))

    def test_divergence_detected(self, make_linear_ode):
        """Test that an untamed explosive drift trips the divergence probe."""
        model = make_linear_ode(1e200)
        grid = TimeGrid(horizon=1.0, steps=1)
        with pytest.raises(SimulationDivergedError) as exc_info:
            step_ensemble(
                EnsembleState.initial(model, grid, 2),
                model,
                SchemeSpec.tamed_euler(TamingVariant.NONE),
                zero_noise_block(2, 1.0),
            )
        assert exc_info.value.step_index == 1
        assert exc_info.value.particle == 0

    def test_taming_prevents_divergence(self, make_linear_ode):
        """Test that the tamed drift moves at most 1 per step."""
        model = make_linear_ode(1e200)
        grid = TimeGrid(horizon=1.0, steps=1)
        out = step_ensemble(
            EnsembleState.initial(model, grid, 1), model, SchemeSpec.tamed_euler(), zero_noise_block(1, 1.0)
        )
        assert out.positions[0] == pytest.approx(2.0)

    def test_custom_threshold(self, make_linear_ode):
        """Test that the divergence threshold is configurable."""
        model = make_linear_ode(2.0)
        grid = TimeGrid(horizon=1.0, steps=1)
        state = EnsembleState.initial(model, grid, 1)
        with pytest.raises(SimulationDivergedError):
            step_ensemble(state, model, SchemeSpec.tamed_euler(TamingVariant.NONE), zero_noise_block(1, 1.0), 2.5)


class TestSimulate:
    """Tests for whole-grid simulation."""

    def test_deterministic(self, ex3):
        """Test that the same seed gives bit-identical results."""
        grid = TimeGrid(horizon=1.0, steps=8)
        spec = SchemeSpec.tamed_milstein(lions=True)
        a = simulate_terminal(ex3, spec, grid, 6, seed=21)
        b = simulate_terminal(ex3, spec, grid, 6, seed=21)
        np.testing.assert_array_equal(a.positions, b.positions)
        assert a.step_index == 8

    def test_path_has_all_nodes(self, ex2):
        """Test that a path holds M + 1 slices ending at T."""
        grid = TimeGrid(horizon=1.0, steps=8)
        path = simulate_path(ex2, SchemeSpec.tamed_milstein(lions=False), grid, 4, seed=3)
        assert len(path) == 9
        assert [s.step_index for s in path] == list(range(9))
        assert path[-1].time == 1.0
        assert len(summarize_path(path)) == 9

    def test_observer_sees_every_slice(self, ex1):
        """Test that the observer is called once per node."""
        seen = []
        simulate_terminal(
            ex1, SchemeSpec.tamed_euler(), TimeGrid(horizon=1.0, steps=4), 3, seed=1, observer=seen.append
        )
        assert [s.step_index for s in seen] == [0, 1, 2, 3, 4]

    def test_geometric_milstein_mirrors_hand_loop(self, make_geometric_model):
        """Test the untamed Milstein scheme against an explicit loop over the same noise."""
        mu_coef, sigma_coef = 0.05, 0.2
        model = make_geometric_model(mu_coef, sigma_coef)
        grid = TimeGrid(horizon=0.75, steps=3)
        n, seed = 4, 99

        y = np.full(n, 1.0)
        for step in range(3):
            noise = sample_noise_block(seed, step, n, grid.delta)
            sigma = sigma_coef * y
            new = y + (mu_coef * y) * grid.delta + sigma * noise.increments
            y = new + np.full(n, sigma_coef) * sigma * noise.diagonal_iterated

        out = simulate_terminal(model, SchemeSpec.standard_milstein(lions=False), grid, n, seed)
        np.testing.assert_array_equal(out.positions, y)

    def test_particle_offset_reproduces_subsystem_noise(self, make_geometric_model):
        """Test that a measure-free run at an offset matches the tail of a larger run."""
        model = make_geometric_model(0.1, 0.3)
        grid = TimeGrid(horizon=1.0, steps=4)
        spec = SchemeSpec.tamed_milstein(lions=False)
        full = simulate_terminal(model, spec, grid, 8, seed=5)
        tail = simulate_terminal(model, spec, grid, 4, seed=5, particle_offset=4)
        np.testing.assert_allclose(tail.positions, full.positions[4:], rtol=1e-14)


class TestCoupledPair:
    """Tests for fine and coarse runs on one Brownian path."""

    def test_linear_ode_closed_forms(self, make_linear_ode):
        """Test (1 + a delta)^M on the fine grid and (1 + 2 a delta)^(M/2) on the coarse grid."""
        a = -1.0
        model = make_linear_ode(a)
        grid = TimeGrid(horizon=1.0, steps=8)
        fine, coarse = simulate_coupled_pair(model, SchemeSpec.tamed_euler(TamingVariant.NONE), grid, 2, seed=1)
        np.testing.assert_allclose(fine.positions, (1 + a * grid.delta) ** 8, rtol=1e-12)
        np.testing.assert_allclose(coarse.positions, (1 + 2 * a * grid.delta) ** 4, rtol=1e-12)
        assert fine.step_index == 8
        assert coarse.step_index == 4
        assert coarse.grid.steps == 4

    def test_driftless_paths_end_at_same_point(self, make_constant_model):
        """Test that with additive noise both grids end at X0 plus the total increment."""
        model = make_constant_model(diffusion=1.0)
        grid = TimeGrid(horizon=1.0, steps=8)
        fine, coarse = simulate_coupled_pair(model, SchemeSpec.tamed_euler(), grid, 3, seed=17)
        total = sum(sample_increments(17, step, 3, grid.delta) for step in range(8))
        np.testing.assert_allclose(fine.positions, 1.0 + total, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(coarse.positions, fine.positions, rtol=1e-12, atol=1e-12)

    def test_fine_run_matches_plain_simulation(self, ex3):
        """Test that the fine half of the pair is the ordinary fine run."""
        grid = TimeGrid(horizon=1.0, steps=8)
        spec = SchemeSpec.tamed_milstein(lions=True)
        fine, _ = simulate_coupled_pair(ex3, spec, grid, 4, seed=8)
        plain = simulate_terminal(ex3, spec, grid, 4, seed=8)
        np.testing.assert_array_equal(fine.positions, plain.positions)

    def test_odd_grid_rejected(self, ex1):
        """Test that the fine grid must have an even step count."""
        with pytest.raises(InvalidInputError):
            simulate_coupled_pair(ex1, SchemeSpec.tamed_euler(), TimeGrid(horizon=1.0, steps=5), 2, seed=1)
