"""
The underlying space X: an open box in R^d with Lebesgue volume.

Houses the intensity density ρ of σ = ρ·m, compactly supported vector fields,
their flows, logarithmic derivatives β^σ and β_v^σ, the push-forward density
p_φ^σ of a flow, Lie brackets and σ-masses of windows.

Point arguments are accepted either as a single point (d,) or as a batch
(m, d); results follow the same shape convention.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from app.core.config import settings
from app.core.errors import DerivativeDepthError, DomainError
from app.domain.fields import GradientInnerField, ScalarField
from app.schemas.window import Window
from app.utils.numerics import integrate_box, rk4_flow

logger = logging.getLogger(__name__)


def as_batch(points, dimension: int) -> tuple[np.ndarray, bool]:
    """Return (m, d) points and whether the input was a single point."""
    arr = np.asarray(points, dtype=float)
    single = arr.ndim <= 1
    return arr.reshape(-1, dimension), single


# ---------------------------------------------------------------------------
# Intensity densities
# ---------------------------------------------------------------------------


class IntensityDensity(ABC):
    """Positive C² density ρ of the intensity measure on a domain window."""

    order = 2

    def __init__(self, domain: Window):
        self.domain = domain
        self.dimension = domain.dimension

    @abstractmethod
    def value(self, points: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def gradient(self, points: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def hessian(self, points: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def supremum(self, window: Window) -> float | None:
        """Exact sup of ρ over the window when the family knows it."""

    @abstractmethod
    def describe(self) -> str: ...

    def beta(self, points: np.ndarray) -> np.ndarray:
        return self.gradient(points) / self.value(points)[:, None]

    def beta_jacobian(self, points: np.ndarray) -> np.ndarray:
        """∂_j β_i = ∂_ij ρ / ρ - β_i β_j."""
        rho = self.value(points)
        beta = self.gradient(points) / rho[:, None]
        return self.hessian(points) / rho[:, None, None] - np.einsum("mi,mj->mij", beta, beta)

    def check_domain(self, points: np.ndarray) -> None:
        lo = self.domain.lower_array
        hi = self.domain.upper_array
        if points.size and not np.all((points >= lo) & (points <= hi)):
            raise DomainError(
                "Point outside the domain window",
                data={"domain": self.domain.model_dump()},
            )


class ConstantDensity(IntensityDensity):
    def __init__(self, domain: Window, level: float = 1.0):
        super().__init__(domain)
        if level <= 0:
            raise ValueError("density level must be positive")
        self.level = float(level)

    def value(self, points):
        return np.full(points.shape[0], self.level)

    def gradient(self, points):
        return np.zeros(points.shape)

    def hessian(self, points):
        return np.zeros((points.shape[0], self.dimension, self.dimension))

    def supremum(self, window):
        return self.level

    def describe(self):
        return f"(constant {self.level!r})"


class GaussianDensity(IntensityDensity):
    """A·exp(-|x - c|² / (2w²))."""

    def __init__(self, domain: Window, amplitude=1.0, center=0.0, width=1.0):
        super().__init__(domain)
        if amplitude <= 0 or width <= 0:
            raise ValueError("gaussian amplitude and width must be positive")
        self.amplitude = float(amplitude)
        self.center = np.broadcast_to(np.asarray(center, dtype=float), (self.dimension,)).copy()
        self.width = float(width)

    def value(self, points):
        r2 = np.sum((points - self.center) ** 2, axis=1)
        return self.amplitude * np.exp(-0.5 * r2 / self.width**2)

    def gradient(self, points):
        return -self.value(points)[:, None] * (points - self.center) / self.width**2

    def hessian(self, points):
        diff = (points - self.center) / self.width**2
        outer = np.einsum("mi,mj->mij", diff, diff)
        eye = np.eye(self.dimension) / self.width**2
        return self.value(points)[:, None, None] * (outer - eye)

    def supremum(self, window):
        nearest = np.clip(self.center, window.lower_array, window.upper_array)
        return float(self.value(nearest[None, :])[0])

    def describe(self):
        return f"(gaussian {self.amplitude!r} ({' '.join(map(repr, self.center.tolist()))}) {self.width!r})"


class QuadraticDensity(IntensityDensity):
    """c₀ + Σ_k q_k (x_k - m_k)², positive for c₀ > 0 and q_k ≥ 0."""

    def __init__(self, domain: Window, offset=1.0, curvature=1.0, center=0.0):
        super().__init__(domain)
        self.offset = float(offset)
        self.curvature = np.broadcast_to(
            np.asarray(curvature, dtype=float), (self.dimension,)
        ).copy()
        self.center = np.broadcast_to(np.asarray(center, dtype=float), (self.dimension,)).copy()
        if self.offset <= 0 or np.any(self.curvature < 0):
            raise ValueError("quadratic density needs offset > 0 and curvature >= 0")

    def value(self, points):
        return self.offset + np.sum(self.curvature * (points - self.center) ** 2, axis=1)

    def gradient(self, points):
        return 2.0 * self.curvature * (points - self.center)

    def hessian(self, points):
        return np.broadcast_to(
            np.diag(2.0 * self.curvature), (points.shape[0], self.dimension, self.dimension)
        ).copy()

    def supremum(self, window):
        far = np.maximum(
            (window.lower_array - self.center) ** 2, (window.upper_array - self.center) ** 2
        )
        return float(self.offset + np.sum(self.curvature * far))

    def describe(self):
        return (
            f"(quadratic {self.offset!r} ({' '.join(map(repr, self.curvature.tolist()))}) "
            f"({' '.join(map(repr, self.center.tolist()))}))"
        )


# ---------------------------------------------------------------------------
# Vector fields
# ---------------------------------------------------------------------------


class CompactVectorField(ABC):
    """
    Smooth vector field with compact support.

    ``jacobian`` returns J[m, i, j] = ∂_j v_i and ``second`` returns
    S[m, i, j, k] = ∂_j ∂_k v_i.
    """

    dimension: int
    order: int
    support: Window | None

    @abstractmethod
    def value(self, points: np.ndarray) -> np.ndarray: ...

    def jacobian(self, points: np.ndarray) -> np.ndarray:
        raise DerivativeDepthError(self.describe(), 1)

    def second(self, points: np.ndarray) -> np.ndarray:
        raise DerivativeDepthError(self.describe(), 2)

    def divergence(self, points: np.ndarray) -> np.ndarray:
        return np.trace(self.jacobian(points), axis1=1, axis2=2)

    def divergence_gradient(self, points: np.ndarray) -> np.ndarray:
        """∂_k div v = Σ_i ∂_i ∂_k v_i."""
        return np.einsum("miik->mk", self.second(points))

    def require(self, order: int) -> None:
        if self.order < order:
            raise DerivativeDepthError(self.describe(), order)

    @abstractmethod
    def describe(self) -> str: ...

    def __repr__(self) -> str:
        return self.describe()


class ZeroVectorField(CompactVectorField):
    def __init__(self, dimension: int):
        self.dimension = dimension
        self.order = 2
        self.support = None

    def value(self, points):
        return np.zeros(points.shape)

    def jacobian(self, points):
        return np.zeros((points.shape[0], self.dimension, self.dimension))

    def second(self, points):
        d = self.dimension
        return np.zeros((points.shape[0], d, d, d))

    def describe(self):
        return "(zero-field)"


class BumpVectorField(CompactVectorField):
    """v(x) = a·(c + ⟨s, x⟩)·b(x) for a direction a, affine modulation and bump b."""

    def __init__(self, direction: Sequence[float], bump: ScalarField, slope=0.0, intercept=1.0):
        self.direction = np.atleast_1d(np.asarray(direction, dtype=float))
        self.bump = bump
        self.dimension = bump.dimension
        if self.direction.size != self.dimension:
            raise ValueError("direction must match the bump dimension")
        self.slope = np.broadcast_to(np.asarray(slope, dtype=float), (self.dimension,)).copy()
        self.intercept = float(intercept)
        self.order = min(bump.order, 2)
        self.support = bump.support

    def _modulation(self, points):
        return self.intercept + points @ self.slope

    def _scalar_gradient(self, points):
        return self.slope[None, :] * self.bump.value(points)[:, None] + (
            self._modulation(points)[:, None] * self.bump.gradient(points)
        )

    def _scalar_hessian(self, points):
        grad_b = self.bump.gradient(points)
        cross = np.einsum("i,mj->mij", self.slope, grad_b)
        return (
            cross
            + np.transpose(cross, (0, 2, 1))
            + self._modulation(points)[:, None, None] * self.bump.hessian(points)
        )

    def value(self, points):
        q = self._modulation(points) * self.bump.value(points)
        return q[:, None] * self.direction[None, :]

    def jacobian(self, points):
        return np.einsum("i,mj->mij", self.direction, self._scalar_gradient(points))

    def second(self, points):
        return np.einsum("i,mjk->mijk", self.direction, self._scalar_hessian(points))

    def describe(self):
        return (
            f"(field ({' '.join(map(repr, self.direction.tolist()))}) {self.bump.describe()} "
            f"({' '.join(map(repr, self.slope.tolist()))}) {self.intercept!r})"
        )


class GradientVectorField(CompactVectorField):
    """v = ∇χ."""

    def __init__(self, potential: ScalarField):
        potential.require(1)
        self.potential = potential
        self.dimension = potential.dimension
        self.order = min(potential.order - 1, 2)
        self.support = potential.support

    def value(self, points):
        return self.potential.gradient(points)

    def jacobian(self, points):
        self.require(1)
        return self.potential.hessian(points)

    def second(self, points):
        self.require(2)
        return self.potential.third(points)

    def describe(self):
        return f"(gradient {self.potential.describe()})"


class VectorFieldSum(CompactVectorField):
    def __init__(self, terms: Sequence[tuple[float, CompactVectorField]]):
        if not terms:
            raise ValueError("VectorFieldSum needs at least one term")
        self.terms = [(float(c), v) for c, v in terms]
        self.dimension = self.terms[0][1].dimension
        self.order = min(v.order for _, v in self.terms)
        self.support = None
        for _, v in self.terms:
            if v.support is not None:
                self.support = v.support if self.support is None else self.support.hull(v.support)

    def _combine(self, method, points):
        return np.sum([c * getattr(v, method)(points) for c, v in self.terms], axis=0)

    def value(self, points):
        return self._combine("value", points)

    def jacobian(self, points):
        return self._combine("jacobian", points)

    def second(self, points):
        return self._combine("second", points)

    def describe(self):
        return "(field-sum " + " ".join(f"({c!r} {v.describe()})" for c, v in self.terms) + ")"


class LieBracketField(CompactVectorField):
    """[v₁, v₂] = (∇v₂)v₁ - (∇v₁)v₂."""

    def __init__(self, first: CompactVectorField, second: CompactVectorField):
        first.require(1)
        second.require(1)
        self.first = first
        self.second_field = second
        self.dimension = first.dimension
        self.order = min(first.order, second.order) - 1
        if first.support is None or second.support is None:
            self.support = None
        else:
            self.support = first.support.hull(second.support)

    def value(self, points):
        v1 = self.first.value(points)
        v2 = self.second_field.value(points)
        return np.einsum("mij,mj->mi", self.second_field.jacobian(points), v1) - np.einsum(
            "mij,mj->mi", self.first.jacobian(points), v2
        )

    def jacobian(self, points):
        self.require(1)
        v1 = self.first.value(points)
        v2 = self.second_field.value(points)
        j1 = self.first.jacobian(points)
        j2 = self.second_field.jacobian(points)
        s1 = self.first.second(points)
        s2 = self.second_field.second(points)
        return (
            np.einsum("mijk,mj->mik", s2, v1)
            + np.einsum("mij,mjk->mik", j2, j1)
            - np.einsum("mijk,mj->mik", s1, v2)
            - np.einsum("mij,mjk->mik", j1, j2)
        )

    def describe(self):
        return f"(bracket {self.first.describe()} {self.second_field.describe()})"


# ---------------------------------------------------------------------------
# Scalar fields that depend on ρ
# ---------------------------------------------------------------------------


class LogDerivativeField(ScalarField):
    """β_v^σ = ⟨β^σ, v⟩ + div v."""

    def __init__(self, rho: IntensityDensity, field: CompactVectorField):
        field.require(1)
        self.rho = rho
        self.field = field
        self.dimension = rho.dimension
        self.order = min(rho.order - 1, field.order - 1)
        self.support = field.support

    def value(self, points):
        return np.einsum("mi,mi->m", self.rho.beta(points), self.field.value(points)) + (
            self.field.divergence(points)
        )

    def gradient(self, points):
        self.require(1)
        beta = self.rho.beta(points)
        v = self.field.value(points)
        return (
            np.einsum("mij,mi->mj", self.rho.beta_jacobian(points), v)
            + np.einsum("mij,mi->mj", self.field.jacobian(points), beta)
            + self.field.divergence_gradient(points)
        )

    def describe(self):
        return f"(log-derivative {self.rho.describe()} {self.field.describe()})"


class GeneratorField(ScalarField):
    """Δφ + ⟨β^σ, ∇φ⟩, i.e. minus the underlying Dirichlet operator applied to φ."""

    def __init__(self, rho: IntensityDensity, phi: ScalarField):
        phi.require(2)
        self.rho = rho
        self.phi = phi
        self.dimension = phi.dimension
        self.order = 0
        self.support = phi.support

    def value(self, points):
        return self.phi.laplacian(points) + np.einsum(
            "mi,mi->m", self.rho.beta(points), self.phi.gradient(points)
        )

    def describe(self):
        return f"(generator {self.rho.describe()} {self.phi.describe()})"


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FlowResult:
    """Endpoint φ_t^v(x) and log of the push-forward volume density there."""

    endpoint: np.ndarray
    log_jacobian: np.ndarray | float


def beta_eval(rho: IntensityDensity, x) -> np.ndarray:
    """β^σ(x) = ∇ρ(x)/ρ(x)."""
    pts, single = as_batch(x, rho.dimension)
    rho.check_domain(pts)
    out = rho.beta(pts)
    return out[0] if single else out


def beta_v_eval(rho: IntensityDensity, v: CompactVectorField, x):
    """β_v^σ(x) = ⟨β^σ(x), v(x)⟩ + div v(x)."""
    pts, single = as_batch(x, rho.dimension)
    rho.check_domain(pts)
    out = LogDerivativeField(rho, v).value(pts)
    return float(out[0]) if single else out


def flow(v: CompactVectorField, t: float, x, max_step: float | None = None) -> FlowResult:
    """
    Integrate the flow of ``v`` for time ``t`` starting from ``x``.

    The log-Jacobian integrates d(log J)/dt = -div v along the trajectory, so
    exp(log_jacobian) is the density of the push-forward of Lebesgue measure
    at the endpoint.
    """
    pts, single = as_batch(x, v.dimension)
    end, log_j = rk4_flow(
        v.value,
        lambda y: -v.divergence(y),
        pts,
        float(t),
        settings.flow_max_step if max_step is None else max_step,
    )
    if single:
        return FlowResult(endpoint=end[0], log_jacobian=float(log_j[0]))
    return FlowResult(endpoint=end, log_jacobian=log_j)


def density_ratio(rho: IntensityDensity, v: CompactVectorField, t: float, x, max_step=None):
    """
    p_φ^σ(x) = d(φ*σ)/dσ(x) for φ = φ_t^v.

    Equals ρ(φ_{-t}(x))/ρ(x) times the push-forward volume density at x, which
    is the log-Jacobian of the t-flow ending at x: the backward trajectory
    from x accumulates the opposite sign.
    """
    pts, single = as_batch(x, rho.dimension)
    rho.check_domain(pts)
    back = flow(v, -float(t), pts, max_step=max_step)
    ratio = rho.value(back.endpoint) / rho.value(pts) * np.exp(-np.asarray(back.log_jacobian))
    return float(ratio[0]) if single else ratio


def lie_bracket(v1: CompactVectorField, v2: CompactVectorField) -> CompactVectorField:
    """[v₁, v₂] = ⟨v₁, ∇v₂⟩ - ⟨v₂, ∇v₁⟩."""
    if v1.dimension != v2.dimension:
        raise DomainError("Lie bracket of fields on different spaces")
    return LieBracketField(v1, v2)


def integrate_sigma(
    rho: IntensityDensity,
    integrand,
    window: Window | None = None,
    rtol: float | None = None,
) -> float:
    """∫_Λ f dσ for a vectorized f; Λ defaults to the domain window."""
    region = rho.domain if window is None else window
    if not rho.domain.contains_window(region):
        raise DomainError("Integration window must lie inside the domain window")
    return integrate_box(
        lambda pts: integrand(pts) * rho.value(pts),
        region,
        rtol=settings.quadrature_rtol if rtol is None else rtol,
        atol=settings.quadrature_atol,
        limit=settings.quadrature_limit,
    )


def integrate_field(
    rho: IntensityDensity, field: ScalarField, integrand, rtol: float | None = None
) -> float:
    """∫ g dσ where g vanishes outside ``field.support`` (zero for the zero field)."""
    if field.support is None:
        return 0.0
    region = field.support.intersection(rho.domain)
    if region is None:
        return 0.0
    return integrate_sigma(rho, integrand, region, rtol=rtol)


def sigma_mass(rho: IntensityDensity, window: Window, rtol: float | None = None) -> float:
    """σ(Λ) = ∫_Λ ρ dm by adaptive quadrature."""
    mass = integrate_sigma(rho, lambda pts: np.ones(pts.shape[0]), window, rtol=rtol)
    logger.debug(f"sigma mass over {window.ranges}: {mass}")
    return mass


def underlying_dirichlet_apply(rho: IntensityDensity, phi: ScalarField, x):
    """H_σ φ(x) = -Δφ(x) - ⟨β^σ(x), ∇φ(x)⟩."""
    pts, single = as_batch(x, rho.dimension)
    out = -GeneratorField(rho, phi).value(pts)
    return float(out[0]) if single else out


def underlying_form(rho: IntensityDensity, phi: ScalarField, psi: ScalarField) -> float:
    """E_σ(φ, ψ) = ∫⟨∇φ, ∇ψ⟩ dσ."""
    inner = GradientInnerField(phi, psi)
    return integrate_field(rho, inner, inner.value)
