"""
Differential calculus on configuration space.

All operations accept a single MarkedConfiguration (and return floats) or an
Ensemble (and return one value per configuration). Cylinder functions and
expression trees are interchangeable wherever a functional is expected.
"""

import logging
from typing import Literal

import numpy as np

from app.core.config import settings
from app.domain.configuration import (
    Ensemble,
    MarkedConfiguration,
    as_ensemble,
    pair,
    pushforward,
    unbatch,
)
from app.domain.cylinder import (
    BetaSection,
    CylinderFunction,
    CylinderVectorField,
    Diffeo,
    GradientSection,
    LiftedSection,
    Section,
)
from app.domain.expressions import (
    Constant,
    Expression,
    OuterFunction,
    UnmarkedPair,
    make_product,
    make_sum,
)
from app.domain.fields import GradientInnerField, ScalarField
from app.domain.marks import MarkLaw
from app.domain.space import (
    CompactVectorField,
    GeneratorField,
    GradientVectorField,
    IntensityDensity,
    LogDerivativeField,
    density_ratio,
    flow,
    integrate_field,
    integrate_sigma,
)

logger = logging.getLogger(__name__)

DirichletMode = Literal["omega_metric", "gamma_metric", "paper_literal"]
DerivativeMethod = Literal["analytic", "flow_fd"]
Metric = Literal["omega", "gamma"]

DIRICHLET_MODES: tuple[DirichletMode, ...] = ("omega_metric", "gamma_metric", "paper_literal")

# Carré du champ paired with each Dirichlet operator mode.
CARRE_METRIC: dict[str, Metric] = {
    "omega_metric": "omega",
    "gamma_metric": "gamma",
    "paper_literal": "omega",
}


def _atom_weights(batch: Ensemble, weighting: str) -> np.ndarray:
    if weighting == "unmarked":
        return np.ones(batch.n_atoms)
    marks = batch.marks
    if marks.ndim != 1:
        # R^q-marked configurations carry unit weights
        return np.ones(batch.n_atoms)
    if weighting == "marked":
        return marks
    if weighting == "squared":
        return marks**2
    raise ValueError(f"unknown weighting: {weighting}")


def _weighted_pair(batch: Ensemble, field: ScalarField, weighting: str) -> np.ndarray:
    if batch.n_atoms == 0:
        return np.zeros(batch.size)
    return batch.per_configuration_sum(field.value(batch.points) * _atom_weights(batch, weighting))


def _evaluate(functional, batch: Ensemble) -> np.ndarray:
    return np.asarray(functional.evaluate(batch), dtype=float)


class CalculusService:
    """
    Intrinsic calculus for π_σ^τ with intensity density ρ and mark law τ.

    ``tau`` may be None for R^q-marked configurations, in which case λ = 1.
    """

    def __init__(self, rho: IntensityDensity, tau: MarkLaw | None = None):
        self.rho = rho
        self.tau = tau
        self._exponents: dict[Diffeo, float] = {}

    @property
    def intensity_scale(self) -> float:
        return 1.0 if self.tau is None else self.tau.total_mass

    # ------------------------------------------------------------------
    # Evaluation and derivatives
    # ------------------------------------------------------------------

    def evaluate(self, F, omega):
        batch, single = as_ensemble(omega)
        return unbatch(_evaluate(F, batch), single)

    def directional_derivative(
        self,
        F,
        v: CompactVectorField,
        omega,
        method: DerivativeMethod = "analytic",
        step: float | None = None,
    ):
        """
        ∇_v F(ω) = d/dt F(φ_t^v ω) at t = 0.

        ``analytic`` differentiates the expression tree; ``flow_fd`` takes a
        central difference of F along pushed-forward configurations.

        Raises:
            DerivativeDepthError: If the analytic form needs missing derivative data
        """
        batch, single = as_ensemble(omega)
        if method == "analytic":
            out = _evaluate(F.derivative(v), batch)
        elif method == "flow_fd":
            h = settings.fd_step if step is None else step
            ahead = _evaluate(F, pushforward(batch, v, h))
            behind = _evaluate(F, pushforward(batch, v, -h))
            out = (ahead - behind) / (2.0 * h)
        else:
            raise ValueError(f"unknown derivative method: {method}")
        return unbatch(out, single)

    def intrinsic_gradient(self, F: CylinderFunction, omega=None) -> GradientSection:
        """
        ∇^Ω F as a section; evaluate it with ``.at(omega, x)`` or ``.on_atoms(batch)``.

        The section depends on ω only through its coefficients, so ``omega``
        is accepted for symmetry with the other operations and ignored.
        """
        return GradientSection(F)

    def tangent_inner(
        self, first: Section, second: Section, omega, weighting: str = "marked"
    ):
        """⟨V₁, V₂⟩_{T_ωΩ} = Σ_x s_x ⟨V₁(x), V₂(x)⟩."""
        batch, single = as_ensemble(omega)
        if batch.n_atoms == 0:
            return unbatch(np.zeros(batch.size), single)
        inner = np.einsum("mi,mi->m", first.on_atoms(batch), second.on_atoms(batch))
        out = batch.per_configuration_sum(inner * _atom_weights(batch, weighting))
        return unbatch(out, single)

    def log_derivative_B(self, v: CompactVectorField, omega):
        """B_v(ω) = ⟨γ_ω, β_v^σ⟩; marks play no role."""
        batch, single = as_ensemble(omega)
        return unbatch(pair(batch, LogDerivativeField(self.rho, v), "unmarked"), single)

    def divergence(self, V: CylinderVectorField, omega):
        """div V = Σ_j ⟨∇^Ω G_j, v_j⟩_{T_ωΩ} + Σ_j B_{v_j}·G_j."""
        batch, single = as_ensemble(omega)
        out = np.zeros(batch.size)
        for g, v in V.terms:
            out = out + self.tangent_inner(GradientSection(g), LiftedSection(v), batch)
            out = out + self.log_derivative_B(v, batch) * g.evaluate(batch)
        return unbatch(out, single)

    # ------------------------------------------------------------------
    # Dirichlet operator
    # ------------------------------------------------------------------

    def _second_order_part(self, F: CylinderFunction, batch: Ensemble, weighting: str):
        hess = F.hessian_coefficients(batch)
        out = np.zeros(batch.size)
        for i, phi in enumerate(F.directions):
            for j, psi in enumerate(F.directions):
                if j < i:
                    continue
                paired = _weighted_pair(batch, GradientInnerField(phi, psi), weighting)
                factor = 1.0 if i == j else 2.0
                out = out + factor * hess[:, i, j] * paired
        return out

    def dirichlet_apply(self, F: CylinderFunction, omega, mode: DirichletMode = "omega_metric"):
        """
        HF(ω) in one of three conventions.

        omega_metric is -div ∇^Ω F: second-order terms against ω and the drift
        against γ_ω. gamma_metric weights the second-order terms by s_x² and
        the drift by s_x. paper_literal integrates every term against ω.
        """
        if mode not in DIRICHLET_MODES:
            raise ValueError(f"unknown Dirichlet mode: {mode}")
        batch, single = as_ensemble(omega)
        second_weight = "squared" if mode == "gamma_metric" else "marked"
        drift_weight = "unmarked" if mode == "omega_metric" else "marked"

        grad = F.gradient_coefficients(batch)
        out = -self._second_order_part(F, batch, second_weight)
        for i, phi in enumerate(F.directions):
            out = out - grad[:, i] * _weighted_pair(batch, GeneratorField(self.rho, phi), drift_weight)
        return unbatch(out, single)

    def carre(self, F: CylinderFunction, G: CylinderFunction, omega, metric: Metric = "omega"):
        """
        Γ(F, G)(ω) = ⟨∇^Ω F, ∇^Ω G⟩_{T_ωΩ}.

        The ``gamma`` metric is the carré du champ of the unit-speed dynamics,
        Σ_x s_x² ⟨∇^Ω F(x), ∇^Ω G(x)⟩.
        """
        weighting = "squared" if metric == "gamma" else "marked"
        return self.tangent_inner(GradientSection(F), GradientSection(G), omega, weighting)

    def laplacian(self, F: CylinderFunction, omega):
        """
        Δ^Ω F = Σ_ij ∂²_ij g·⟨ω, ⟨∇φ_i, ∇φ_j⟩⟩ + Σ_i ∂_i g·⟨γ_ω, Δφ_i⟩.

        Together with the drift ⟨∇^Ω F, β^σ⟩ summed over γ_ω it recovers the
        omega_metric operator: HF = -Δ^Ω F - Σ_x ⟨∇^Ω F(x), β^σ(x)⟩.
        """
        batch, single = as_ensemble(omega)
        grad = F.gradient_coefficients(batch)
        out = self._second_order_part(F, batch, "marked")
        for i, phi in enumerate(F.directions):
            if batch.n_atoms:
                out = out + grad[:, i] * batch.per_configuration_sum(phi.laplacian(batch.points))
        return unbatch(out, single)

    def beta_drift(self, F: CylinderFunction, omega):
        """Σ_{x∈γ_ω} ⟨∇^Ω F(x), β^σ(x)⟩."""
        return self.tangent_inner(GradientSection(F), BetaSection(self.rho), omega, "unmarked")

    def gradient_field(self, F: CylinderFunction) -> CylinderVectorField:
        """∇^Ω F written as a cylinder vector field Σ_i ∂_i g·∇φ_i."""
        terms = []
        for i, phi in enumerate(F.directions):
            partial = CylinderFunction(F.outer.partial(i), F.directions)
            terms.append((partial, GradientVectorField(phi)))
        return CylinderVectorField(terms)

    # ------------------------------------------------------------------
    # Quasi-invariance and the unitary representation
    # ------------------------------------------------------------------

    def rn_exponent(self, phi: Diffeo) -> float:
        """λ_τ ∫(1 - p_φ^σ) dσ over the support of the generator."""
        if phi.is_identity:
            return 0.0
        if phi not in self._exponents:
            v = phi.generator
            deficit = SupportIndicator(v)
            integral = integrate_field(
                self.rho,
                deficit,
                lambda pts: 1.0 - density_ratio(self.rho, v, phi.time, pts),
            )
            self._exponents[phi] = self.intensity_scale * integral
            logger.debug(f"rn exponent for t={phi.time}: {self._exponents[phi]}")
        return self._exponents[phi]

    def rn_density(self, phi: Diffeo, omega):
        """
        p_φ(ω) = d(φ*π)/dπ(ω) = Π_{x∈γ_ω} p_φ^σ(x)·exp(λ_τ ∫(1 - p_φ^σ) dσ).

        Depends on ω only through γ_ω.
        """
        batch, single = as_ensemble(omega)
        if phi.is_identity:
            return unbatch(np.ones(batch.size), single)
        log_p = np.zeros(batch.size)
        if batch.n_atoms:
            ratios = density_ratio(self.rho, phi.generator, phi.time, batch.points)
            log_p = batch.per_configuration_sum(np.log(ratios))
        return unbatch(np.exp(log_p + self.rn_exponent(phi)), single)

    def rep_apply(self, phi: Diffeo, F, omega):
        """(V(φ)F)(ω) = F(φω)·√p_{φ⁻¹}(ω)."""
        batch, single = as_ensemble(omega)
        if phi.is_identity:
            return unbatch(_evaluate(F, batch), single)
        moved = pushforward(batch, phi.generator, phi.time)
        weight = np.sqrt(self.rn_density(phi.inverse(), batch))
        return unbatch(_evaluate(F, moved) * weight, single)

    def lift_A_expression(self, v: CompactVectorField, F) -> Expression:
        """
        A(v)F = ∇_v F + ½ B_v F as an expression tree.

        Raises:
            DerivativeDepthError: If a field lacks the next derivative order
        """
        expr = F.expression if isinstance(F, CylinderFunction) else F
        half_b = make_product(
            [Constant(0.5), UnmarkedPair(LogDerivativeField(self.rho, v)), expr]
        )
        return make_sum([expr.derivative(v), half_b])

    def lift_A_apply(self, v: CompactVectorField, F, omega, method: str = "analytic", step=None):
        """
        (A(v)F)(ω), the generator of t ↦ V(φ_t^v).

        ``analytic`` evaluates ∇_v F + ½ B_v F; ``symbolic`` evaluates the
        expression tree from lift_A_expression; ``flow_fd`` differentiates
        rep_apply by central differences.
        """
        batch, single = as_ensemble(omega)
        if method == "analytic":
            out = self.directional_derivative(F, v, batch) + 0.5 * self.log_derivative_B(
                v, batch
            ) * _evaluate(F, batch)
        elif method == "symbolic":
            out = _evaluate(self.lift_A_expression(v, F), batch)
        elif method == "flow_fd":
            h = settings.fd_step if step is None else step
            ahead = self.rep_apply(Diffeo(v, h), F, batch)
            behind = self.rep_apply(Diffeo(v, -h), F, batch)
            out = (ahead - behind) / (2.0 * h)
        else:
            raise ValueError(f"unknown method: {method}")
        return unbatch(out, single)

    def image_laplace_target(self, phi: Diffeo, f: ScalarField) -> float:
        """
        E[exp⟨φω, f⟩] under π_σ^τ, i.e. the Laplace functional of π_{φ*σ}^τ.

        Equals exp(∫∫(e^{s f(φ(x))} - 1) dτ(s) dσ(x)).
        """
        v = phi.generator

        def integrand(pts: np.ndarray) -> np.ndarray:
            moved = flow(v, phi.time, pts).endpoint if not phi.is_identity else pts
            return laplace_kernel(self.tau, f.value(moved))

        return float(np.exp(integrate_sigma(self.rho, integrand)))


class SupportIndicator(ScalarField):
    """Constant one on the support of a vector field; bounds quadrature regions."""

    def __init__(self, v: CompactVectorField):
        self.dimension = v.dimension
        self.order = 0
        self.support = v.support

    def value(self, points):
        return np.ones(np.asarray(points).reshape(-1, self.dimension).shape[0])

    def describe(self):
        return "(support)"


def laplace_kernel(tau: MarkLaw | None, values: np.ndarray) -> np.ndarray:
    """κ(y) = ∫(e^{s·y} - 1) dτ(s) for each entry of ``values``; τ = None means δ_1."""
    values = np.asarray(values, dtype=float)
    if tau is None:
        return np.expm1(values)
    return tau.laplace_exponent(values)


def linear_function(phi: ScalarField, name: str = "") -> CylinderFunction:
    """F(ω) = ⟨ω, φ⟩."""
    return CylinderFunction(OuterFunction.ridge("identity", [1.0]), [phi], name=name)
