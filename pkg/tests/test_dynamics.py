"""
Tests for the equilibrium dynamics.
"""

import numpy as np
import pytest

from app.core.errors import DomainError
from app.domain.configuration import MarkedConfiguration
from app.services.dynamics_service import (
    MATCHED_DIRICHLET_MODE,
    DynamicsService,
    TrajectoryState,
    _extrapolate,
)
from app.services.sampler_service import RandomStream


@pytest.fixture
def dynamics(rho):
    return DynamicsService(rho)


class TestSimulate:
    """Test trajectories."""

    def test_zero_horizon_returns_initial_state(self, dynamics, omega):
        states = dynamics.simulate(omega, 1e-3, 0.0, "mark_weighted", RandomStream(1))
        assert len(states) == 1
        assert states[0].time == 0.0
        assert states[0].configuration == omega

    def test_stride_keeps_final_state(self, dynamics, omega):
        states = dynamics.simulate(omega, 1e-3, 0.01, "mark_weighted", RandomStream(1), stride=4)
        assert [round(s.time, 6) for s in states] == [0.0, 0.004, 0.008, 0.01]

    def test_marks_frozen_and_atoms_inside(self, dynamics, omega, domain):
        final = dynamics.simulate(omega, 1e-2, 0.5, "mark_weighted", RandomStream(3))[-1]
        moved = final.configuration
        assert sorted(moved.marks.tolist()) == sorted(omega.marks.tolist())
        assert np.all(np.abs(moved.points) <= 1.0)

    def test_same_stream_same_trajectory(self, dynamics, omega):
        first = dynamics.simulate(omega, 1e-3, 0.02, "unit", RandomStream(5, 9))
        second = dynamics.simulate(omega, 1e-3, 0.02, "unit", RandomStream(5, 9))
        assert first[-1].configuration == second[-1].configuration

    def test_modes_coincide_for_unit_marks(self, dynamics, omega):
        unit_omega = MarkedConfiguration(omega.points, np.ones(len(omega)))
        weighted = dynamics.simulate(unit_omega, 1e-3, 0.02, "mark_weighted", RandomStream(2))
        unit = dynamics.simulate(unit_omega, 1e-3, 0.02, "unit", RandomStream(2))
        assert np.allclose(weighted[-1].configuration.points, unit[-1].configuration.points)

    def test_empty_configuration_stays_empty(self, dynamics):
        empty = MarkedConfiguration.empty(1)
        states = dynamics.simulate(empty, 1e-3, 0.005, "unit", RandomStream(0))
        assert all(len(s.configuration) == 0 for s in states)

    def test_step_size_guard(self, dynamics, omega):
        with pytest.raises(DomainError):
            dynamics.simulate(omega, 0.05, 0.1, "unit", RandomStream(0))
        with pytest.raises(DomainError):
            dynamics.em_step(TrajectoryState(0.0, omega), 0.0, "unit", RandomStream(0))

    def test_horizon_must_be_multiple_of_step(self, dynamics, omega):
        with pytest.raises(DomainError):
            dynamics.simulate(omega, 3e-3, 0.01, "unit", RandomStream(0))


class TestGeneratorEstimate:
    """Test the Richardson-extrapolated generator estimate."""

    def test_extrapolation_of_exact_line(self):
        per_step = [(2e-3, 1.006, 0.1), (1e-3, 1.003, 0.1)]
        estimate, stderr = _extrapolate(per_step)
        assert estimate == pytest.approx(1.0)
        assert stderr > 0.1

    def test_needs_two_steps(self, dynamics, linear, omega):
        with pytest.raises(DomainError):
            dynamics.generator_estimate(linear, omega, "unit", [1e-3], 100, RandomStream(0))

    @pytest.mark.slow
    def test_matches_minus_dirichlet_operator(self, dynamics, calculus, linear, omega):
        """E[F(Ξ_dt)] - F(ω) ≈ -dt·HF(ω) in the matched convention."""
        mode = "mark_weighted"
        target = -calculus.dirichlet_apply(linear, omega, MATCHED_DIRICHLET_MODE[mode])
        result = dynamics.generator_estimate(
            linear, omega, mode, [2e-3, 1e-3], 20_000, RandomStream(11, 4)
        )
        assert len(result.per_step) == 2
        assert abs(result.estimate - target) < 5 * result.stderr + 0.02 * (1 + abs(target))

    def test_unit_mode_matches_gamma_metric_operator(self, dynamics, calculus, linear, omega):
        """Unit-mobility dynamics carry the operator whose metric weights by s²."""
        mode = "unit"
        target = -calculus.dirichlet_apply(linear, omega, MATCHED_DIRICHLET_MODE[mode])
        result = dynamics.generator_estimate(
            linear, omega, mode, [2e-3, 1e-3], 20_000, RandomStream(12, 4)
        )
        assert abs(result.estimate - target) < 5 * result.stderr + 0.02 * (1 + abs(target))

    def test_step_bias_is_first_order(self, dynamics, tanh_function, omega):
        """The per-step means lie on a line in dt."""
        result = dynamics.generator_estimate(
            tanh_function, omega, "mark_weighted", [4e-3, 2e-3, 1e-3], 20_000, RandomStream(13, 4)
        )
        (dt_a, mean_a, se_a), (dt_b, mean_b, se_b), (dt_c, mean_c, se_c) = result.per_step
        assert (dt_a, dt_b, dt_c) == (4e-3, 2e-3, 1e-3)
        interpolated = (mean_a + 2 * mean_c) / 3
        spread = np.sqrt(se_b**2 + (se_a**2 + 4 * se_c**2) / 9)
        assert abs(mean_b - interpolated) < 4 * spread + 1e-3


class TestReversibility:
    """Test time reversal at equilibrium."""

    @pytest.mark.parametrize("mode", ["mark_weighted", "unit"])
    def test_paired_time_reversal(
        self, dynamics, sampler, tau, domain, linear, tanh_function, mode
    ):
        """E[F(Ξ_0)G(Ξ_T)] = E[G(Ξ_0)F(Ξ_T)]."""
        n, dt, horizon = 20_000, 1e-3, 0.05
        start = sampler.sample_compound_batch(tau, domain, RandomStream(31).generator(), n)
        states = dynamics.simulate(start, dt, horizon, mode, RandomStream(31, 1), stride=50)
        end = states[-1].configuration
        F, G = linear, tanh_function
        differences = F.evaluate(start) * G.evaluate(end) - G.evaluate(start) * F.evaluate(end)
        stderr = differences.std() / np.sqrt(n)
        assert abs(differences.mean()) < 4 * stderr
