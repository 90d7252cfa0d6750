"""
Tests for the configuration-space calculus.
"""

import numpy as np
import pytest

from app.domain.configuration import Ensemble, MarkedConfiguration, pushforward
from app.domain.cylinder import Diffeo, GradientSection, LiftedSection
from app.services.calculus_service import DIRICHLET_MODES
from app.services.sampler_service import RandomStream


class Represented:
    """ω ↦ (V(φ)F)(ω) as a functional."""

    def __init__(self, calculus, phi, F):
        self.calculus = calculus
        self.phi = phi
        self.F = F

    def evaluate(self, batch):
        return self.calculus.rep_apply(self.phi, self.F, batch)


@pytest.fixture
def unit_omega(omega):
    return MarkedConfiguration(omega.points, np.ones(len(omega)))


class TestTangentGeometry:
    """Test gradients, the tangent inner product and Γ."""

    def test_carre_is_symmetric(self, calculus, linear, tanh_function, omega):
        assert calculus.carre(linear, tanh_function, omega) == pytest.approx(
            calculus.carre(tanh_function, linear, omega)
        )

    def test_carre_of_linear_function(self, calculus, linear, bumps, omega):
        """Γ(⟨·,φ⟩)(ω) = ⟨ω, |∇φ|²⟩."""
        grad = bumps[0].gradient(omega.points)[:, 0]
        assert calculus.carre(linear, linear, omega) == pytest.approx(np.sum(omega.marks * grad**2))

    def test_gamma_metric_squares_marks(self, calculus, linear, bumps, omega):
        grad = bumps[0].gradient(omega.points)[:, 0]
        expected = np.sum(omega.marks**2 * grad**2)
        assert calculus.carre(linear, linear, omega, metric="gamma") == pytest.approx(expected)

    def test_lifted_field_norm(self, calculus, fields, omega):
        v = LiftedSection(fields[1])
        expected = np.sum(omega.marks * fields[1].value(omega.points)[:, 0] ** 2)
        assert calculus.tangent_inner(v, v, omega) == pytest.approx(expected)

    def test_gradient_pairs_with_directional_derivative(self, calculus, tanh_function, fields, omega):
        """⟨∇^Ω F, v⟩_{T_ωΩ} = ∇_v F."""
        inner = calculus.tangent_inner(
            GradientSection(tanh_function), LiftedSection(fields[0]), omega
        )
        assert inner == pytest.approx(calculus.directional_derivative(tanh_function, fields[0], omega))

    def test_empty_configuration(self, calculus, linear):
        empty = MarkedConfiguration.empty(1)
        assert calculus.carre(linear, linear, empty) == 0.0
        assert calculus.dirichlet_apply(linear, empty) == 0.0

    def test_ensemble_matches_single(self, calculus, tanh_function, omega, unit_omega):
        batch = Ensemble.from_configurations([omega, unit_omega])
        values = calculus.carre(tanh_function, tanh_function, batch)
        assert values == pytest.approx(
            [
                calculus.carre(tanh_function, tanh_function, omega),
                calculus.carre(tanh_function, tanh_function, unit_omega),
            ]
        )


class TestDirichletOperator:
    """Test H in its three conventions."""

    def test_decomposition(self, calculus, tanh_function, omega):
        """H = -Δ^Ω - Σ_x ⟨∇^Ω F(x), β^σ(x)⟩."""
        expected = -calculus.laplacian(tanh_function, omega) - calculus.beta_drift(
            tanh_function, omega
        )
        assert calculus.dirichlet_apply(tanh_function, omega) == pytest.approx(expected)

    def test_minus_divergence_of_gradient(self, calculus, tanh_function, omega):
        div = calculus.divergence(calculus.gradient_field(tanh_function), omega)
        assert div == pytest.approx(-calculus.dirichlet_apply(tanh_function, omega))

    def test_modes_coincide_for_unit_marks(self, calculus, tanh_function, unit_omega):
        values = [calculus.dirichlet_apply(tanh_function, unit_omega, mode) for mode in DIRICHLET_MODES]
        assert values == pytest.approx([values[0]] * 3)

    def test_modes_differ_for_heavy_marks(self, calculus, tanh_function, omega):
        values = {mode: calculus.dirichlet_apply(tanh_function, omega, mode) for mode in DIRICHLET_MODES}
        assert values["omega_metric"] != pytest.approx(values["gamma_metric"])
        assert values["omega_metric"] != pytest.approx(values["paper_literal"])

    def test_linear_function_under_omega_metric(self, calculus, rho, linear, bumps, omega):
        """H⟨·,φ⟩(ω) = -Σ_x (Δφ + ⟨β, ∇φ⟩)(x)."""
        phi = bumps[0]
        x = omega.points
        expected = -np.sum(phi.laplacian(x) + rho.beta(x)[:, 0] * phi.gradient(x)[:, 0])
        assert calculus.dirichlet_apply(linear, omega) == pytest.approx(expected)

    def test_unknown_mode(self, calculus, linear, omega):
        with pytest.raises(ValueError):
            calculus.dirichlet_apply(linear, omega, mode="metric")

    @pytest.mark.parametrize("mode", DIRICHLET_MODES)
    def test_finite_near_support_edge(self, calculus, linear, mode):
        """Atoms at the edge of a bump's support contribute nothing."""
        edge = MarkedConfiguration(np.array([[0.49999], [0.843]]), np.array([1.0, 2.0]))
        value = calculus.dirichlet_apply(linear, edge, mode=mode)
        assert np.isfinite(value)
        assert value == pytest.approx(0.0, abs=1e-12)


class TestQuasiInvariance:
    """Test Radon-Nikodym densities and the unitary representation."""

    def test_identity_diffeo(self, calculus, tanh_function, fields, omega):
        phi = Diffeo(fields[0], 0.0)
        assert calculus.rn_density(phi, omega) == 1.0
        assert calculus.rep_apply(phi, tanh_function, omega) == pytest.approx(
            calculus.evaluate(tanh_function, omega)
        )

    def test_interior_flow_keeps_total_mass(self, calculus, fields):
        """The normalizing exponent vanishes for flows supported inside the domain."""
        assert calculus.rn_exponent(Diffeo(fields[0], 0.3)) == pytest.approx(0.0, abs=1e-6)

    def test_density_ignores_marks(self, calculus, fields, omega, unit_omega):
        phi = Diffeo(fields[1], 0.25)
        assert calculus.rn_density(phi, omega) == pytest.approx(calculus.rn_density(phi, unit_omega))

    def test_representation_is_a_group(self, calculus, tanh_function, fields, omega):
        """V(φ_s)V(φ_t) = V(φ_{s+t}) along one generator."""
        v = fields[1]
        inner = Represented(calculus, Diffeo(v, 0.1), tanh_function)
        composed = calculus.rep_apply(Diffeo(v, 0.15), inner, omega)
        direct = calculus.rep_apply(Diffeo(v, 0.25), tanh_function, omega)
        assert composed == pytest.approx(direct, abs=1e-6)

    def test_density_cocycle(self, calculus, fields, omega):
        """p_t(ω)·p_s(φ_{-t}ω) = p_{t+s}(ω) along one generator."""
        v, t, s = fields[1], 0.1, 0.15
        moved = pushforward(omega, v, -t)
        first = calculus.rn_density(Diffeo(v, t), omega)
        product = first * calculus.rn_density(Diffeo(v, s), moved)
        assert product == pytest.approx(calculus.rn_density(Diffeo(v, t + s), omega), rel=1e-6)

    def test_representation_is_isometric(
        self, calculus, sampler, tau, domain, tanh_function, fields
    ):
        """E[(V(φ)F)²] = E[F²] under the compound Poisson law."""
        n = 20_000
        batch = sampler.sample_compound_batch(tau, domain, RandomStream(21).generator(), n)
        moved = calculus.rep_apply(Diffeo(fields[1], 0.3), tanh_function, batch)
        differences = moved**2 - calculus.evaluate(tanh_function, batch) ** 2
        stderr = differences.std() / np.sqrt(n)
        assert abs(differences.mean()) < 4 * stderr


class TestLiftedGenerator:
    """Test A(v) = ∇_v + ½B_v."""

    @pytest.mark.parametrize("method", ["symbolic", "flow_fd"])
    def test_methods_agree(self, calculus, tanh_function, fields, omega, method):
        v = fields[0]
        analytic = calculus.lift_A_apply(v, tanh_function, omega)
        assert calculus.lift_A_apply(v, tanh_function, omega, method=method) == pytest.approx(
            analytic, abs=1e-6
        )

    def test_zero_outside_support(self, calculus, linear, fields):
        far = MarkedConfiguration(np.array([[0.9]]), np.array([1.0]))
        assert calculus.lift_A_apply(fields[0], linear, far) == 0.0

    def test_unknown_method(self, calculus, linear, fields, omega):
        with pytest.raises(ValueError):
            calculus.lift_A_apply(fields[0], linear, omega, method="spectral")
