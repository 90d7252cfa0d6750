"""
Cylinder functions, sections of the tangent bundle and flow diffeomorphisms.

A section is stored as a finite combination Σ_k c_k(ω)·w_k(x) of
configuration-dependent coefficients and vector-valued functions on X. The
intrinsic gradient of a cylinder function, a lifted vector field and a
cylinder vector field are all of this form, which lets the tangent inner
product be evaluated for a whole ensemble with one pass over the atoms.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from app.domain.configuration import Ensemble, MarkedConfiguration, pair
from app.domain.expressions import Expression, MarkedPair, Outer, OuterFunction
from app.domain.fields import ScalarField
from app.domain.space import CompactVectorField


class CylinderFunction:
    """F(ω) = g(⟨ω,φ_1⟩, …, ⟨ω,φ_N⟩)."""

    def __init__(self, outer: OuterFunction, directions: Sequence[ScalarField], name: str = ""):
        if not directions:
            raise ValueError("a cylinder function needs at least one direction")
        if outer.arity != len(directions):
            raise ValueError("outer arity must match the number of directions")
        self.outer = outer
        self.directions = tuple(directions)
        self.name = name

    @property
    def arity(self) -> int:
        return len(self.directions)

    def pairings(self, batch: Ensemble) -> np.ndarray:
        """(n, N) matrix of ⟨ω, φ_i⟩."""
        return np.stack([pair(batch, phi, "marked") for phi in self.directions], axis=1)

    def evaluate(self, batch: Ensemble) -> np.ndarray:
        return self.outer(self.pairings(batch))

    def gradient_coefficients(self, batch: Ensemble) -> np.ndarray:
        return self.outer.gradient(self.pairings(batch))

    def hessian_coefficients(self, batch: Ensemble) -> np.ndarray:
        return self.outer.hessian(self.pairings(batch))

    @property
    def expression(self) -> Expression:
        return Outer(self.outer, [MarkedPair(phi) for phi in self.directions])

    def derivative(self, field: CompactVectorField) -> Expression:
        return self.expression.derivative(field)

    def render(self) -> str:
        return self.expression.render()

    def __repr__(self) -> str:
        label = f"{self.name}: " if self.name else ""
        return f"CylinderFunction({label}{self.outer.describe()})"


# ---------------------------------------------------------------------------
# Sections
# ---------------------------------------------------------------------------


class Section(ABC):
    """A finitely supported section x ↦ V_ω(x) = Σ_k c_k(ω) w_k(x)."""

    @abstractmethod
    def coefficients(self, batch: Ensemble) -> np.ndarray:
        """(n, K) configuration-dependent coefficients."""

    @abstractmethod
    def components(self) -> Sequence[Callable[[np.ndarray], np.ndarray]]:
        """K maps (m, d) -> (m, d)."""

    def on_atoms(self, batch: Ensemble) -> np.ndarray:
        """V_ω(x) at every atom of every configuration, shape (M, d)."""
        out = np.zeros(batch.points.shape)
        if batch.n_atoms == 0:
            return out
        coeff = self.coefficients(batch)[batch.owner]
        for k, component in enumerate(self.components()):
            out += coeff[:, k, None] * component(batch.points)
        return out

    def at(self, omega: MarkedConfiguration, x) -> np.ndarray:
        """V_ω(x) at arbitrary positions for a single configuration."""
        pts = np.asarray(x, dtype=float).reshape(-1, omega.dimension)
        coeff = self.coefficients(omega.as_ensemble())[0]
        out = np.zeros(pts.shape)
        for c, component in zip(coeff, self.components(), strict=True):
            out += c * component(pts)
        return out


class LiftedSection(Section):
    """The constant section x ↦ v(x) of a vector field on X."""

    def __init__(self, field: CompactVectorField):
        self.field = field

    def coefficients(self, batch):
        return np.ones((batch.size, 1))

    def components(self):
        return [self.field.value]


class GradientSection(Section):
    """∇^Ω F(ω)(x) = Σ_i ∂_i g(…)·∇φ_i(x)."""

    def __init__(self, function: CylinderFunction):
        self.function = function

    def coefficients(self, batch):
        return self.function.gradient_coefficients(batch)

    def components(self):
        return [phi.gradient for phi in self.function.directions]


class BetaSection(Section):
    """The constant section x ↦ β^σ(x)."""

    def __init__(self, rho):
        self.rho = rho

    def coefficients(self, batch):
        return np.ones((batch.size, 1))

    def components(self):
        return [self.rho.beta]


class CylinderVectorField(Section):
    """V_ω(x) = Σ_j G_j(ω)·v_j(x)."""

    def __init__(self, terms: Sequence[tuple[CylinderFunction, CompactVectorField]]):
        if not terms:
            raise ValueError("a cylinder vector field needs at least one term")
        self.terms = tuple(terms)

    def coefficients(self, batch):
        return np.stack([g.evaluate(batch) for g, _ in self.terms], axis=1)

    def components(self):
        return [v.value for _, v in self.terms]


@dataclass(frozen=True)
class Diffeo:
    """φ = φ_t^v, the time-t flow of a compactly supported field."""

    generator: CompactVectorField
    time: float

    @property
    def is_identity(self) -> bool:
        return self.time == 0.0

    def inverse(self) -> Diffeo:
        return Diffeo(self.generator, -self.time)
