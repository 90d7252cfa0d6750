"""
Tests for mark laws on R₊ and on R^q.
"""

import numpy as np
import pytest

from app.domain.marks import (
    DiscreteVectorMarks,
    GammaLaw,
    MixtureLaw,
    PointMassLaw,
    UniformBoxMarks,
    UniformLaw,
)


class TestMoments:
    """Test exact mark moments."""

    def test_two_atom_mixture(self, tau):
        assert tau.total_mass == 1.0
        assert tau.moment(1) == pytest.approx(1.5)
        assert tau.moment(2) == pytest.approx(2.5)

    def test_point_mass(self):
        law = PointMassLaw(2.0, 3.0)
        assert law.moment(0) == 3.0
        assert law.moment(2) == 12.0

    def test_gamma_moments_match_quadrature(self):
        law = GammaLaw(shape=2.0, scale=0.5, mass=1.5)
        assert law.moment(2) == pytest.approx(law.integrate(lambda s: s**2), rel=1e-7)

    def test_uniform_moments_match_quadrature(self):
        law = UniformLaw(0.5, 2.0)
        assert law.moment(1) == pytest.approx(1.25)
        assert law.moment(3) == pytest.approx(law.integrate(lambda s: s**3), rel=1e-8)

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            MixtureLaw([1.0, -2.0], [0.5, 0.5])
        with pytest.raises(ValueError):
            UniformLaw(2.0, 1.0)


class TestLaplaceExponent:
    """Test κ(y) = ∫(e^{s·y} - 1) dτ(s)."""

    def test_zero_argument(self, tau):
        assert tau.laplace_exponent(np.zeros(3)).tolist() == [0.0, 0.0, 0.0]

    def test_mixture_closed_form(self, tau):
        y = np.array([0.3, -0.2])
        expected = 0.5 * np.expm1(y) + 0.5 * np.expm1(2 * y)
        assert tau.laplace_exponent(y) == pytest.approx(expected)

    def test_generic_quadrature_matches_point_mass(self):
        """The default quadrature path agrees with the point-mass closed form."""
        y = np.array([0.4, -0.1])
        exact = PointMassLaw(1.0, 1.0).laplace_exponent(y)
        via_quadrature = UniformLaw(0.0, 2.0).laplace_exponent(y)
        expected = np.array([(np.expm1(2 * v) / (2 * v)) - 1.0 for v in y])
        assert via_quadrature == pytest.approx(expected, rel=1e-8)
        assert exact == pytest.approx(np.expm1(y))


class TestSampling:
    """Test the normalized samplers."""

    def test_mixture_frequencies(self, tau):
        rng = np.random.default_rng(7)
        draws = tau.sample_normalized(rng, 100_000)
        share = float(np.mean(draws == 1.0))
        se = np.sqrt(0.25 / draws.size)
        assert abs(share - 0.5) < 4 * se
        assert set(np.unique(draws).tolist()) == {1.0, 2.0}

    def test_uniform_box_mark_mean(self):
        marks = UniformBoxMarks([0.0], [1.0])
        draws = marks.sample(np.random.default_rng(11), 50_000)
        assert draws.shape == (50_000, 1)
        assert abs(draws.mean() - 0.5) < 4 * np.sqrt(1 / 12 / draws.size)

    def test_uniform_box_expectation(self):
        marks = UniformBoxMarks([0.0, -1.0], [1.0, 1.0])
        assert marks.expect(lambda m: m[:, 0] + m[:, 1] ** 2) == pytest.approx(0.5 + 1 / 3)

    def test_discrete_marks(self):
        marks = DiscreteVectorMarks([[0.0, 1.0], [2.0, 3.0]], [0.25, 0.75])
        assert marks.dimension == 2
        assert marks.expect(lambda m: m[:, 0]) == pytest.approx(1.5)
        with pytest.raises(ValueError):
            DiscreteVectorMarks([[0.0], [1.0]], [0.5, 0.6])
