"""
Pytest configuration and shared fixtures.

This file is automatically loaded by pytest before any tests run.
"""

import os

# Set test environment variables BEFORE any app imports
os.environ["ENVIRONMENT"] = "testing"
os.environ["LOG_TO_FILE"] = "false"

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from app.data import DEFAULT_CONFIG  # noqa: E402
from app.domain.configuration import MarkedConfiguration  # noqa: E402
from app.domain.cylinder import CylinderFunction  # noqa: E402
from app.domain.expressions import OuterFunction  # noqa: E402
from app.domain.fields import ProductBump  # noqa: E402
from app.domain.marks import MixtureLaw  # noqa: E402
from app.domain.space import BumpVectorField, GaussianDensity  # noqa: E402
from app.schemas.run_config import parse_config  # noqa: E402
from app.schemas.window import Window  # noqa: E402
from app.services.calculus_service import CalculusService  # noqa: E402
from app.services.fixture_service import FixtureService  # noqa: E402
from app.services.sampler_service import SamplerService  # noqa: E402


@pytest.fixture
def domain():
    """The window (-1, 1)."""
    return Window.from_bounds(-1.0, 1.0)


@pytest.fixture
def rho(domain):
    """ρ(x) = exp(-x²/2) on (-1, 1)."""
    return GaussianDensity(domain)


@pytest.fixture
def tau():
    """½δ₁ + ½δ₂."""
    return MixtureLaw([1.0, 2.0], [0.5, 0.5])


@pytest.fixture
def bumps():
    return [ProductBump([0.0], 0.5), ProductBump([0.3], 0.5), ProductBump([-0.3], 0.5)]


@pytest.fixture
def fields(bumps):
    return [
        BumpVectorField([0.8], bumps[0]),
        BumpVectorField([0.6], bumps[1], slope=0.5),
        BumpVectorField([-0.7], bumps[2]),
    ]


@pytest.fixture
def linear(bumps):
    """F(ω) = ⟨ω, b0⟩."""
    return CylinderFunction(OuterFunction.ridge("identity", [1.0]), [bumps[0]], name="L0")


@pytest.fixture
def tanh_function(bumps):
    """F(ω) = tanh(⟨ω, b1⟩ + 0.5⟨ω, b2⟩)."""
    return CylinderFunction(
        OuterFunction.ridge("tanh", [1.0, 0.5]), [bumps[1], bumps[2]], name="T1"
    )


@pytest.fixture
def calculus(rho, tau):
    return CalculusService(rho, tau)


@pytest.fixture
def sampler(rho):
    return SamplerService(rho)


@pytest.fixture
def omega():
    """Three atoms with marks 2, 1, 2."""
    return MarkedConfiguration(np.array([[0.0], [0.25], [-0.3]]), np.array([2.0, 1.0, 2.0]))


@pytest.fixture
def default_config():
    return parse_config(DEFAULT_CONFIG)


@pytest.fixture
def fixture(default_config):
    """Domain objects of the default run config."""
    return FixtureService().build(default_config)
