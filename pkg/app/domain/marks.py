"""
Mark laws.

Compound mode: a finite measure τ on (0, ∞), handled as its total mass
λ_τ = τ(R₊) together with a sampler for the normalized law τ/λ_τ and exact
moments m_k(τ) = ∫ s^k dτ(s).

Marked mode: a probability law on M = R^q with a sampler and expectations.

Lognormal marks are deliberately absent: their moments grow faster than
C^n n!, which the compound Poisson construction requires.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from collections.abc import Callable, Sequence

import numpy as np
from scipy import special, stats

from app.core.config import settings
from app.schemas.window import Window
from app.utils.numerics import integrate_box, integrate_line


class MarkLaw(ABC):
    """Finite measure τ on (0, ∞)."""

    is_discrete: bool = False

    @property
    @abstractmethod
    def total_mass(self) -> float:
        """λ_τ = τ(R₊)."""

    @abstractmethod
    def sample_normalized(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` marks from τ/λ_τ."""

    @abstractmethod
    def moment(self, k: int) -> float:
        """m_k(τ) = ∫ s^k dτ(s); moment(0) = λ_τ."""

    @abstractmethod
    def integrate(self, h: Callable[[np.ndarray], np.ndarray]) -> float:
        """∫ h(s) dτ(s) for a vectorized h."""

    def laplace_exponent(self, values: np.ndarray) -> np.ndarray:
        """κ(y) = ∫(e^{s·y} - 1) dτ(s) for each entry of ``values``."""
        values = np.asarray(values, dtype=float)
        out = np.zeros_like(values)
        for k in np.flatnonzero(values):
            y = values.flat[k]
            out.flat[k] = self.integrate(lambda s, y=y: np.expm1(s * y))
        return out

    @abstractmethod
    def describe(self) -> str: ...

    def __repr__(self) -> str:
        return self.describe()


class PointMassLaw(MarkLaw):
    """mass·δ_s."""

    is_discrete = True

    def __init__(self, location: float = 1.0, mass: float = 1.0):
        if location <= 0 or mass <= 0:
            raise ValueError("point mass needs a positive location and mass")
        self.location = float(location)
        self.mass = float(mass)

    @property
    def total_mass(self):
        return self.mass

    def sample_normalized(self, rng, size):
        return np.full(size, self.location)

    def moment(self, k):
        return self.mass * self.location**k

    def integrate(self, h):
        return float(self.mass * h(np.array([self.location]))[0])

    def laplace_exponent(self, values):
        return self.mass * np.expm1(self.location * np.asarray(values, dtype=float))

    def describe(self):
        return f"(point-mass {self.location!r} {self.mass!r})"


class MixtureLaw(MarkLaw):
    """Σ_i w_i δ_{a_i} with positive atoms and weights."""

    is_discrete = True

    def __init__(self, atoms: Sequence[float], weights: Sequence[float]):
        self.atoms = np.asarray(atoms, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        if self.atoms.shape != self.weights.shape or self.atoms.size == 0:
            raise ValueError("atoms and weights must be non-empty and of equal length")
        if np.any(self.atoms <= 0) or np.any(self.weights <= 0):
            raise ValueError("mixture atoms and weights must be positive")
        self._probabilities = self.weights / self.weights.sum()

    @property
    def total_mass(self):
        return float(self.weights.sum())

    def sample_normalized(self, rng, size):
        return rng.choice(self.atoms, size=size, p=self._probabilities)

    def moment(self, k):
        return float(np.sum(self.weights * self.atoms**k))

    def integrate(self, h):
        return float(np.sum(self.weights * h(self.atoms)))

    def laplace_exponent(self, values):
        y = np.asarray(values, dtype=float)
        return np.expm1(np.multiply.outer(y, self.atoms)) @ self.weights

    def describe(self):
        pairs = " ".join(f"({a!r} {w!r})" for a, w in zip(self.atoms, self.weights, strict=True))
        return f"(mixture {pairs})"


class GammaLaw(MarkLaw):
    """mass·Gamma(shape, scale)."""

    def __init__(self, shape: float, scale: float, mass: float = 1.0):
        if shape <= 0 or scale <= 0 or mass <= 0:
            raise ValueError("gamma law needs positive shape, scale and mass")
        self.shape = float(shape)
        self.scale = float(scale)
        self.mass = float(mass)
        self._law = stats.gamma(a=self.shape, scale=self.scale)

    @property
    def total_mass(self):
        return self.mass

    def sample_normalized(self, rng, size):
        return rng.gamma(self.shape, self.scale, size=size)

    def moment(self, k):
        return float(self.mass * self.scale**k * special.poch(self.shape, k))

    def integrate(self, h):
        return self.mass * integrate_line(
            lambda s: float(h(np.array([s]))[0] * self._law.pdf(s)),
            0.0,
            np.inf,
            rtol=settings.quadrature_rtol,
            atol=settings.quadrature_atol,
            limit=settings.quadrature_limit,
        )

    def describe(self):
        return f"(gamma {self.shape!r} {self.scale!r} {self.mass!r})"


class UniformLaw(MarkLaw):
    """mass·Uniform(low, high) with 0 <= low < high."""

    def __init__(self, low: float, high: float, mass: float = 1.0):
        if not 0 <= low < high or mass <= 0:
            raise ValueError("uniform law needs 0 <= low < high and positive mass")
        self.low = float(low)
        self.high = float(high)
        self.mass = float(mass)

    @property
    def total_mass(self):
        return self.mass

    def sample_normalized(self, rng, size):
        return rng.uniform(self.low, self.high, size=size)

    def moment(self, k):
        span = self.high - self.low
        return self.mass * (self.high ** (k + 1) - self.low ** (k + 1)) / ((k + 1) * span)

    def integrate(self, h):
        span = self.high - self.low
        return self.mass / span * integrate_line(
            lambda s: float(h(np.array([s]))[0]),
            self.low,
            self.high,
            rtol=settings.quadrature_rtol,
            atol=settings.quadrature_atol,
            limit=settings.quadrature_limit,
        )

    def describe(self):
        return f"(uniform {self.low!r} {self.high!r} {self.mass!r})"


# ---------------------------------------------------------------------------
# Marks on M = R^q
# ---------------------------------------------------------------------------


class VectorMarkLaw(ABC):
    """Probability law on R^q."""

    dimension: int

    @abstractmethod
    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """(size, q) marks."""

    @abstractmethod
    def expect(self, h: Callable[[np.ndarray], np.ndarray]) -> float:
        """∫ h dτ for h: (k, q) -> (k,)."""

    @abstractmethod
    def describe(self) -> str: ...


class UniformBoxMarks(VectorMarkLaw):
    def __init__(self, lower, upper):
        self.box = Window.from_bounds(lower, upper)
        self.dimension = self.box.dimension

    def sample(self, rng, size):
        return rng.uniform(self.box.lower_array, self.box.upper_array, size=(size, self.dimension))

    def expect(self, h):
        return (
            integrate_box(
                h,
                self.box,
                rtol=settings.quadrature_rtol,
                atol=settings.quadrature_atol,
                limit=settings.quadrature_limit,
            )
            / self.box.volume
        )

    def describe(self):
        return f"(uniform-box {self.box.lower} {self.box.upper})"


class DiscreteVectorMarks(VectorMarkLaw):
    def __init__(self, atoms, probabilities):
        self.atoms = np.atleast_2d(np.asarray(atoms, dtype=float))
        self.probabilities = np.asarray(probabilities, dtype=float)
        if self.atoms.shape[0] != self.probabilities.size:
            raise ValueError("one probability per atom is required")
        if np.any(self.probabilities < 0) or not np.isclose(self.probabilities.sum(), 1.0):
            raise ValueError("probabilities must be non-negative and sum to one")
        self.dimension = self.atoms.shape[1]

    def sample(self, rng, size):
        index = rng.choice(self.atoms.shape[0], size=size, p=self.probabilities)
        return self.atoms[index]

    def expect(self, h):
        return float(np.sum(self.probabilities * h(self.atoms)))

    def describe(self):
        return f"(discrete-marks {self.atoms.tolist()} {self.probabilities.tolist()})"
