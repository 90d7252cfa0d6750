"""
Tests for outer functions, expression trees and cylinder functions.
"""

import math

import numpy as np
import pytest

from app.domain.configuration import Ensemble, MarkedConfiguration
from app.domain.cylinder import CylinderFunction, Diffeo
from app.domain.expressions import (
    ZERO,
    Constant,
    MarkedPair,
    OuterFunction,
    Product,
    Sum,
    make_product,
    make_sum,
)


class TestOuterFunction:
    """Test symbolic outer functions."""

    def test_tanh_partial_at_origin(self):
        g = OuterFunction.ridge("tanh", [1.0, 0.5])
        assert g.gradient(np.zeros((1, 2)))[0] == pytest.approx([1.0, 0.5])

    def test_poly_profile(self):
        """g(y) = y + ½y²."""
        g = OuterFunction.ridge("poly", [1.0], coefficients=[0.0, 1.0, 0.5])
        assert g(np.array([[2.0]]))[0] == pytest.approx(4.0)
        assert g.partial(0)(np.array([[2.0]]))[0] == pytest.approx(3.0)

    def test_constant_partial_broadcasts(self):
        g = OuterFunction.ridge("identity", [3.0])
        assert g.partial(0)(np.zeros((4, 1))).tolist() == [3.0] * 4
        assert g.partial(0).partial(0).is_zero

    def test_product_hessian(self):
        g = OuterFunction.product(2, scale=2.0)
        hess = g.hessian(np.array([[0.3, 0.7]]))[0]
        assert hess.tolist() == [[0.0, 2.0], [2.0, 0.0]]

    def test_unknown_profile(self):
        with pytest.raises(ValueError):
            OuterFunction.ridge("cosh", [1.0])

    def test_poly_needs_coefficients(self):
        with pytest.raises(ValueError):
            OuterFunction.ridge("poly", [1.0])


class TestSimplification:
    """Test make_sum and make_product."""

    def test_sum_drops_zeros(self, bumps):
        pair = MarkedPair(bumps[0])
        assert make_sum([ZERO, ZERO]) is ZERO
        assert make_sum([ZERO, pair]) is pair
        assert isinstance(make_sum([pair, pair]), Sum)

    def test_product_absorbs_zero_and_one(self, bumps):
        pair = MarkedPair(bumps[0])
        assert make_product([pair, ZERO]) is ZERO
        assert make_product([Constant(1.0), pair]) is pair
        assert isinstance(make_product([Constant(2.0), pair]), Product)

    def test_constant_derivative_is_zero(self, fields):
        assert Constant(4.0).derivative(fields[0]).evaluate(Ensemble.replicate(
            MarkedConfiguration.empty(1), 2
        )).tolist() == [0.0, 0.0]


class TestCylinderFunction:
    """Test evaluation and derivatives of cylinder functions."""

    def test_single_atom(self, tanh_function):
        """b1 equals one at its center and b2 vanishes there."""
        omega = MarkedConfiguration(np.array([[0.3]]), np.array([2.0]))
        assert tanh_function.evaluate(omega.as_ensemble())[0] == pytest.approx(math.tanh(2.0))

    def test_empty_configuration_gives_g_of_zero(self, bumps):
        g = OuterFunction.ridge("exp", [0.3])
        F = CylinderFunction(g, [bumps[2]])
        empty = MarkedConfiguration.empty(1).as_ensemble()
        assert F.evaluate(empty)[0] == pytest.approx(1.0)

    def test_arity_mismatch(self, bumps):
        with pytest.raises(ValueError):
            CylinderFunction(OuterFunction.ridge("tanh", [1.0, 1.0]), [bumps[0]])

    def test_derivative_matches_flow_difference(self, calculus, tanh_function, fields, omega):
        v = fields[1]
        analytic = calculus.directional_derivative(tanh_function, v, omega)
        numeric = calculus.directional_derivative(tanh_function, v, omega, method="flow_fd")
        assert analytic == pytest.approx(numeric, abs=1e-6)

    def test_second_derivative_matches_flow_difference(self, calculus, linear, fields, omega):
        """Derivative trees can be differentiated again."""
        v, w = fields[0], fields[1]
        first = linear.derivative(v)
        analytic = calculus.directional_derivative(first, w, omega)
        numeric = calculus.directional_derivative(first, w, omega, method="flow_fd")
        assert analytic == pytest.approx(numeric, abs=1e-6)

    def test_render_is_stable(self, linear):
        assert linear.render() == linear.render()
        assert linear.render().startswith("(outer")


class TestDiffeo:
    """Test flow diffeomorphisms."""

    def test_identity_and_inverse(self, fields):
        assert Diffeo(fields[0], 0.0).is_identity
        phi = Diffeo(fields[0], 0.3)
        assert phi.inverse() == Diffeo(fields[0], -0.3)
        assert not phi.is_identity
