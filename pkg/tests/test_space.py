"""
Tests for the underlying space: windows, densities, vector fields and flows.
"""

import math

import numpy as np
import pytest
from scipy import integrate, stats

from app.core.errors import DomainError
from app.domain.fields import BUMP_MAX_ORDER, ProductBump, bump_profile
from app.domain.space import (
    BumpVectorField,
    ConstantDensity,
    GaussianDensity,
    GradientVectorField,
    QuadraticDensity,
    ZeroVectorField,
    beta_eval,
    beta_v_eval,
    density_ratio,
    flow,
    integrate_sigma,
    lie_bracket,
    sigma_mass,
    underlying_dirichlet_apply,
    underlying_form,
)
from app.schemas.window import Window


class TestWindow:
    """Test box windows."""

    def test_contains_is_strict(self, domain):
        """Boundary points are outside the open box."""
        mask = domain.contains(np.array([[-1.0], [0.0], [1.0]]))
        assert mask.tolist() == [False, True, False]

    def test_intersection_of_disjoint_boxes_is_none(self):
        left = Window.from_bounds(0.0, 1.0)
        right = Window.from_bounds(2.0, 3.0)
        assert left.intersection(right) is None

    def test_split_partitions_volume(self, domain):
        left, right = domain.split()
        assert left.volume + right.volume == pytest.approx(domain.volume)
        assert left.upper == right.lower == (0.0,)

    def test_rejects_inverted_corners(self):
        with pytest.raises(ValueError):
            Window(lower=(1.0,), upper=(0.0,))


class TestDensities:
    """Test log-derivatives and masses of the density families."""

    def test_gaussian_beta(self, rho):
        """∇log ρ = -x for ρ = exp(-x²/2)."""
        assert beta_eval(rho, [0.3]) == pytest.approx([-0.3])

    def test_constant_beta_vanishes(self, domain):
        rho = ConstantDensity(domain, 2.0)
        assert np.allclose(beta_eval(rho, np.array([[0.1], [-0.7]])), 0.0)

    def test_quadratic_beta(self, domain):
        """ρ = 1 + x² gives β(0.5) = 2·0.5/1.25."""
        rho = QuadraticDensity(domain, offset=1.0, curvature=1.0)
        assert beta_eval(rho, [0.5]) == pytest.approx([0.8])

    def test_beta_outside_domain_raises(self, rho):
        with pytest.raises(DomainError):
            beta_eval(rho, [1.5])

    def test_constant_mass_is_level_times_volume(self):
        box = Window.from_bounds([0.0, 0.0], [2.0, 0.5])
        assert sigma_mass(ConstantDensity(box, 3.0), box) == pytest.approx(3.0)

    def test_gaussian_mass(self, rho, domain):
        """σ((-1, 1)) = √(2π)(Φ(1) - Φ(-1)) ≈ 1.71125."""
        expected = math.sqrt(2 * math.pi) * (stats.norm.cdf(1.0) - stats.norm.cdf(-1.0))
        assert sigma_mass(rho, domain) == pytest.approx(expected, rel=1e-8)
        assert expected == pytest.approx(1.71125, abs=1e-5)


class TestBumpProfile:
    """Test the bump profile near the edge of its support."""

    def test_derivatives_finite_up_to_the_edge(self):
        u = np.array([-1.0, -0.9999999, 0.9999891718, 0.99999, 0.9999999, 1.0])
        for order in range(BUMP_MAX_ORDER + 1):
            values = bump_profile(u, order)
            assert np.all(np.isfinite(values)), order
            assert np.all(np.abs(values) < 1e-20), order

    def test_laplacian_finite_near_the_boundary(self):
        bump = ProductBump([0.0], 0.5)
        x = np.array([[0.49999458591413304], [0.4999999], [-0.4999999]])
        laplacian = bump.laplacian(x)
        assert np.all(np.isfinite(laplacian))
        assert np.allclose(laplacian, 0.0, atol=1e-20)

    def test_interior_values(self):
        assert bump_profile(np.array([0.0]))[0] == pytest.approx(1.0)
        # h'(u) = -2u/(1-u²)² h(u)
        u = 0.5
        expected = -2 * u / (1 - u**2) ** 2 * math.exp(1 - 1 / (1 - u**2))
        assert bump_profile(np.array([u]), 1)[0] == pytest.approx(expected, rel=1e-12)


class TestVectorFields:
    """Test β_v and Lie brackets."""

    def test_beta_v_vanishes_outside_support(self, rho, fields):
        assert beta_v_eval(rho, fields[0], [0.9]) == 0.0

    def test_beta_v_matches_finite_differences(self, rho, bumps):
        """β_v(x) = -x·χ(x) + χ'(x) for v = χ in d = 1."""
        chi = bumps[0]
        v = BumpVectorField([1.0], chi)
        x, h = 0.17, 1e-5
        chi_prime = (chi.value(np.array([[x + h]]))[0] - chi.value(np.array([[x - h]]))[0]) / (2 * h)
        expected = -x * chi.value(np.array([[x]]))[0] + chi_prime
        assert beta_v_eval(rho, v, [x]) == pytest.approx(expected, rel=1e-6)

    def test_gradient_field_under_constant_density(self, domain, bumps):
        """ρ ≡ 1 and v = ∇χ give β_v = Δχ."""
        rho = ConstantDensity(domain)
        v = GradientVectorField(bumps[0])
        x = np.array([[0.1]])
        assert beta_v_eval(rho, v, x) == pytest.approx(bumps[0].laplacian(x))

    def test_bracket_is_antisymmetric(self, fields):
        x = np.linspace(-0.9, 0.9, 13)[:, None]
        forward = lie_bracket(fields[0], fields[1]).value(x)
        backward = lie_bracket(fields[1], fields[0]).value(x)
        assert np.allclose(forward, -backward, atol=1e-14)

    def test_bracket_with_itself_vanishes(self, fields):
        x = np.linspace(-0.9, 0.9, 13)[:, None]
        assert np.allclose(lie_bracket(fields[1], fields[1]).value(x), 0.0)

    def test_bracket_with_zero_field(self, fields):
        x = np.linspace(-0.9, 0.9, 7)[:, None]
        assert np.allclose(lie_bracket(fields[0], ZeroVectorField(1)).value(x), 0.0)


class TestFlow:
    """Test flows and push-forward densities."""

    def test_zero_time_is_identity(self, fields):
        result = flow(fields[0], 0.0, [0.1])
        assert result.endpoint == pytest.approx([0.1])
        assert result.log_jacobian == 0.0

    def test_points_outside_support_stay(self, fields):
        result = flow(fields[0], 0.5, [0.8])
        assert result.endpoint == pytest.approx([0.8])
        assert result.log_jacobian == 0.0

    def test_backward_flow_inverts_forward_flow(self, fields):
        x = np.linspace(-0.45, 0.45, 9)[:, None]
        forward = flow(fields[0], 0.3, x).endpoint
        assert np.allclose(flow(fields[0], -0.3, forward).endpoint, x, atol=1e-9)

    def test_density_ratio_identity_cases(self, rho, fields):
        assert density_ratio(rho, fields[0], 0.0, [0.1]) == pytest.approx(1.0)
        assert density_ratio(rho, fields[0], 0.3, [0.9]) == pytest.approx(1.0)

    def test_density_ratio_cocycle(self, rho, fields):
        """p_t(x)·p_{-t}(φ_{-t}(x)) = 1."""
        v, t, x = fields[1], 0.3, 0.2
        back = flow(v, -t, [x]).endpoint
        product = density_ratio(rho, v, t, [x]) * density_ratio(rho, v, -t, back)
        assert product == pytest.approx(1.0, rel=1e-6)

    def test_group_law(self, fields):
        x = np.linspace(-0.45, 0.45, 7)[:, None]
        for v in fields:
            first = flow(v, 0.2, x, max_step=1e-3).endpoint
            composed = flow(v, 0.15, first, max_step=1e-3).endpoint
            direct = flow(v, 0.35, x, max_step=1e-3).endpoint
            assert np.allclose(composed, direct, atol=1e-8)

    def test_log_jacobian_matches_inverse_map_derivative(self, fields):
        """exp(log J) at φ_t(x) is ∂φ_{-t}/∂y there, by central differences."""
        v, t, h = fields[1], 0.1, 1e-5
        for x in (-0.1, 0.05, 0.3):
            result = flow(v, t, [x])
            y = float(result.endpoint[0])
            ahead = flow(v, -t, [y + h]).endpoint[0]
            behind = flow(v, -t, [y - h]).endpoint[0]
            derivative = (ahead - behind) / (2 * h)
            assert math.exp(result.log_jacobian) == pytest.approx(derivative, abs=1e-5)

    def test_density_ratio_under_constant_density(self, domain, fields):
        """With ρ ≡ 1, p_t(x) = exp(-∫₀ᵗ div v(φ_{-s}(x)) ds)."""
        rho = ConstantDensity(domain)
        v, t, x = fields[0], 0.2, 0.1

        def divergence_along(s: float) -> float:
            point = flow(v, -s, [x], max_step=1e-3).endpoint.reshape(1, -1)
            return float(v.divergence(point)[0])

        integral, _ = integrate.quad(divergence_along, 0.0, t, epsabs=1e-12, epsrel=1e-10)
        assert density_ratio(rho, v, t, [x]) == pytest.approx(math.exp(-integral), rel=1e-6)

    def test_pushforward_preserves_mass(self, rho, domain, fields):
        """∫ p_φ dσ = σ(Λ) for a flow supported inside Λ."""
        v = fields[0]
        total = integrate_sigma(rho, lambda pts: density_ratio(rho, v, 0.3, pts))
        assert total == pytest.approx(sigma_mass(rho, domain), rel=1e-6)


class TestUnderlyingForm:
    """Test the classical Dirichlet form on X."""

    def test_form_is_symmetric(self, rho, bumps):
        assert underlying_form(rho, bumps[0], bumps[1]) == pytest.approx(
            underlying_form(rho, bumps[1], bumps[0])
        )

    def test_operator_vanishes_outside_support(self, rho, bumps):
        assert underlying_dirichlet_apply(rho, bumps[0], [0.8]) == 0.0

    def test_operator_under_constant_density_is_minus_laplacian(self, domain):
        rho = ConstantDensity(domain)
        bump = ProductBump([0.0], 0.5)
        x = np.array([[0.2]])
        assert underlying_dirichlet_apply(rho, bump, x) == pytest.approx(-bump.laplacian(x))

    def test_gaussian_operator(self, bumps):
        rho = GaussianDensity(Window.from_bounds(-1.0, 1.0))
        phi = bumps[1]
        x = np.array([[0.35]])
        expected = -phi.laplacian(x) + x[0, 0] * phi.gradient(x)[:, 0]
        assert underlying_dirichlet_apply(rho, phi, x) == pytest.approx(expected)
