"""
Monte Carlo and deterministic verification of the closed-form identities.

Every check is a pure function of (fixture, sample size, seed) and returns
MCReport rows. Identities of the form E[A - B] = 0 use paired estimators on a
single sample; identities with a closed-form side use quadrature targets;
exact algebraic identities are reported as deterministic residuals.

Each check owns a disjoint block of random streams, derived from the master
seed and the check's position in CHECK_NAMES, so checks can be run alone or
as a suite with identical results.
"""

import logging
import math
from collections.abc import Callable

import numpy as np
from scipy import stats

from app.core.config import settings
from app.core.errors import DomainError
from app.core.logging_config import LogExecutionTime
from app.domain.configuration import (
    Ensemble,
    MarkedConfiguration,
    MarkedTestFunction,
    pair,
    pair_marked_function,
    pushforward,
    restrict,
)
from app.domain.cylinder import CylinderFunction, CylinderVectorField, Diffeo, GradientSection
from app.domain.expressions import MarkedPair, make_product
from app.domain.fields import DirectionalField, ScalarField
from app.domain.marks import MarkLaw, PointMassLaw
from app.domain.space import (
    CompactVectorField,
    flow,
    integrate_sigma,
    lie_bracket,
    underlying_dirichlet_apply,
    underlying_form,
)
from app.schemas.report import MCReport
from app.schemas.run_config import CHECK_NAMES
from app.schemas.window import Window
from app.services.calculus_service import (
    CARRE_METRIC,
    DIRICHLET_MODES,
    CalculusService,
)
from app.services.dynamics_service import (
    MATCHED_DIRICHLET_MODE,
    DynamicsService,
)
from app.services.fixture_service import Fixture
from app.services.sampler_service import RandomStream, SamplerService, stream_base
from app.utils.numerics import SampleMoments

logger = logging.getLogger(__name__)

# Offset between independent samples inside one check's stream block.
SUBSTREAM = 2**20

# Step of the flow-commutator oracle for Lie brackets.
BRACKET_STEP = 1e-3

LAPLACE_MEASURES = ("simple", "compound", "marked")

Draw = Callable[[np.random.Generator, int], Ensemble]


class VerificationService:
    """Run the verification checks against one fixture."""

    def __init__(self, fixture: Fixture, seed: int | None = None, z_max: float | None = None):
        self.fixture = fixture
        self.seed = fixture.config.job.seed if seed is None else seed
        self.z_max = fixture.config.job.z_max if z_max is None else z_max
        self.window = fixture.domain
        self.sampler = SamplerService(fixture.rho, envelope=fixture.config.space.envelope)
        self.calculus = CalculusService(fixture.rho, fixture.tau)
        self.dynamics = DynamicsService(fixture.rho)

    # ------------------------------------------------------------------
    # Plumbing
    # ------------------------------------------------------------------

    def _base(self, check: str, sub: int = 0) -> int:
        return stream_base(CHECK_NAMES.index(check) + 1) + sub * SUBSTREAM

    def compound_draw(self, tau: MarkLaw | None = None, window: Window | None = None) -> Draw:
        law = self.fixture.tau if tau is None else tau
        region = self.window if window is None else window
        return lambda gen, size: self.sampler.sample_compound_batch(law, region, gen, size)

    def simple_draw(self, scale: float = 1.0, window: Window | None = None) -> Draw:
        region = self.window if window is None else window
        return lambda gen, size: self.sampler.sample_simple_batch(scale, region, gen, size)

    def marked_draw(self) -> Draw:
        marks = self.fixture.marks
        if marks is None:
            raise ValueError("the fixture has no [marks] section")
        return lambda gen, size: self.sampler.sample_marked_batch(marks, self.window, gen, size)

    def mc_expect(
        self, functional: Callable[[Ensemble], np.ndarray], draw: Draw, n: int, base: int = 0
    ) -> list[SampleMoments]:
        """
        Moments of a functional over n i.i.d. configurations.

        Raises:
            DomainError: If n is below the configured minimum
            NonFiniteSampleError: If the functional is not finite on some draw
        """
        if n < settings.min_replicas:
            raise DomainError(
                "Too few replicas", data={"n": n, "min_replicas": settings.min_replicas}
            )
        return self.sampler.replicate(draw, functional, n, self.seed, base)

    def _integral(self, integrand, support: Window | None) -> float:
        """∫ integrand dσ over support ∩ domain (zero when empty)."""
        if support is None:
            return 0.0
        region = support.intersection(self.window)
        if region is None:
            return 0.0
        return integrate_sigma(self.fixture.rho, integrand, region)

    def _report(self, name, anchor, moments: SampleMoments, target, n, **extras) -> MCReport:
        return MCReport.monte_carlo(
            name, anchor, moments.mean, moments.stderr, target, n, self.seed, self.z_max, **extras
        )

    def _sample_configurations(self, k: int, check: str) -> list[MarkedConfiguration]:
        gen = RandomStream(self.seed, self._base(check, 7)).generator()
        batch = self.compound_draw()(gen, k)
        return list(batch.configurations())

    # ------------------------------------------------------------------
    # Laplace functionals and moments
    # ------------------------------------------------------------------

    def check_laplace(self, f: ScalarField | MarkedTestFunction, measure: str, n: int) -> MCReport:
        """
        E[exp⟨ω, f⟩] against its closed form for one of the three measures.

        ``f`` is a ScalarField for the simple and compound measures and a
        MarkedTestFunction for the marked one.
        """
        tau = self.fixture.tau
        if measure == "simple":
            draw = self.simple_draw()
            functional = lambda b: np.exp(pair(b, f, "unmarked"))
            exponent = self._integral(lambda pts: np.expm1(f.value(pts)), f.support)
        elif measure == "compound":
            draw = self.compound_draw()
            functional = lambda b: np.exp(pair(b, f, "marked"))
            exponent = self._integral(lambda pts: tau.laplace_exponent(f.value(pts)), f.support)
        elif measure == "marked":
            marks = self.fixture.marks
            draw = self.marked_draw()
            functional = lambda b: np.exp(pair_marked_function(b, f))

            def kernel(pts: np.ndarray) -> np.ndarray:
                out = np.empty(pts.shape[0])
                for k, x in enumerate(pts):
                    out[k] = marks.expect(
                        lambda m, x=x: np.exp(f.value(np.broadcast_to(x, (m.shape[0], x.size)), m))
                    ) - 1.0
                return out

            exponent = self._integral(kernel, f.field.support)
        else:
            raise ValueError(f"unknown measure: {measure}")

        base = self._base("laplace", LAPLACE_MEASURES.index(measure))
        (moments,) = self.mc_expect(functional, draw, n, base)
        logger.debug(f"laplace[{measure}] exponent {exponent}")
        return self._report(f"laplace[{measure}]", "laplace-functional", moments, math.exp(exponent), n)

    def check_moments(self, f: ScalarField, tau: MarkLaw, n: int) -> list[MCReport]:
        """First moment m₁∫f dσ and second moment m₂∫f²dσ + m₁²(∫f dσ)²."""
        first = self._integral(f.value, f.support)
        square = self._integral(lambda pts: f.value(pts) ** 2, f.support)
        m1, m2 = tau.moment(1), tau.moment(2)

        def functional(batch):
            x = pair(batch, f, "marked")
            return np.stack([x, x * x], axis=1)

        mean, second = self.mc_expect(functional, self.compound_draw(tau), n, self._base("moments"))
        return [
            self._report("moments[first]", "first-moment", mean, m1 * first, n),
            self._report(
                "moments[second]", "second-moment", second, m2 * square + m1**2 * first**2, n
            ),
        ]

    def check_covariance(self, f: ScalarField, g: ScalarField, tau: MarkLaw, n: int) -> MCReport:
        """Cov(⟨ω,f⟩, ⟨ω,g⟩) = m₂∫fg dσ with the exact means subtracted."""
        m1 = tau.moment(1)
        mean_f = m1 * self._integral(f.value, f.support)
        mean_g = m1 * self._integral(g.value, g.support)
        overlap = (
            f.support.intersection(g.support)
            if f.support is not None and g.support is not None
            else None
        )
        target = tau.moment(2) * self._integral(lambda pts: f.value(pts) * g.value(pts), overlap)

        def functional(batch):
            return (pair(batch, f, "marked") - mean_f) * (pair(batch, g, "marked") - mean_g)

        (moments,) = self.mc_expect(functional, self.compound_draw(tau), n, self._base("covariance"))
        return self._report("covariance", "polarized-second-moment", moments, target, n)

    # ------------------------------------------------------------------
    # Integration by parts, divergence and the Dirichlet operator
    # ------------------------------------------------------------------

    def check_ibp(
        self, F: CylinderFunction, G: CylinderFunction, v: CompactVectorField, n: int, index: int = 0
    ) -> MCReport:
        """E[(∇_v F)G + F(∇_v G) + F·G·B_v] = 0, paired."""
        calc = self.calculus

        def functional(batch):
            f_val = F.evaluate(batch)
            g_val = G.evaluate(batch)
            return (
                calc.directional_derivative(F, v, batch) * g_val
                + f_val * calc.directional_derivative(G, v, batch)
                + f_val * g_val * calc.log_derivative_B(v, batch)
            )

        (moments,) = self.mc_expect(functional, self.compound_draw(), n, self._base("ibp", index))
        name = f"ibp[{F.name},{G.name},{index}]"
        return self._report(name, "integration-by-parts", moments, 0.0, n)

    def check_divergence(self, V: CylinderVectorField, F: CylinderFunction, n: int) -> MCReport:
        """E[⟨V, ∇^Ω F⟩_{T_ωΩ} + F·div V] = 0, paired."""
        calc = self.calculus

        def functional(batch):
            return calc.tangent_inner(V, GradientSection(F), batch) + F.evaluate(
                batch
            ) * calc.divergence(V, batch)

        (moments,) = self.mc_expect(functional, self.compound_draw(), n, self._base("divergence"))
        return self._report("divergence", "divergence-duality", moments, 0.0, n)

    def check_symmetry(
        self,
        F: CylinderFunction,
        G: CylinderFunction,
        tau: MarkLaw,
        mode: str,
        n: int,
        label: str = "",
        index: int = 0,
    ) -> MCReport:
        """
        E[Γ(F,G)] = E[(HF)·G] for the mode's operator and carré du champ.

        The extras carry the paired asymmetry E[(HF)G - F(HG)].
        """
        calc = self.calculus
        metric = CARRE_METRIC[mode]

        def functional(batch):
            hf = calc.dirichlet_apply(F, batch, mode)
            hg = calc.dirichlet_apply(G, batch, mode)
            f_val = F.evaluate(batch)
            g_val = G.evaluate(batch)
            residual = calc.carre(F, G, batch, metric) - hf * g_val
            return np.stack([residual, hf * g_val - f_val * hg], axis=1)

        base = self._base("symmetry", 2 * DIRICHLET_MODES.index(mode) + index)
        residual, asymmetry = self.mc_expect(functional, self.compound_draw(tau), n, base)
        suffix = f",{label}" if label else ""
        return self._report(
            f"symmetry[{mode}{suffix}]",
            "form-operator-duality",
            residual,
            0.0,
            n,
            mode=mode,
            asymmetry=asymmetry.mean,
            asymmetry_stderr=asymmetry.stderr,
        )

    def check_underlying_form(self, phi: ScalarField, psi: ScalarField) -> MCReport:
        """E_σ(φ, ψ) = ∫(H_σ φ)ψ dσ by quadrature."""
        rho = self.fixture.rho
        form = underlying_form(rho, phi, psi)
        overlap = phi.support.intersection(psi.support)
        paired = self._integral(
            lambda pts: underlying_dirichlet_apply(rho, phi, pts) * psi.value(pts), overlap
        )
        residual = abs(form - paired) / max(1.0, abs(form))
        return MCReport.deterministic(
            "underlying_form", "underlying-dirichlet-form", residual, 1e-6, 0, self.seed,
            form=form, operator_side=paired,
        )

    # ------------------------------------------------------------------
    # Quasi-invariance and reduction
    # ------------------------------------------------------------------

    def check_quasi_invariance(
        self, phi: Diffeo, F: CylinderFunction, f: ScalarField, n: int
    ) -> list[MCReport]:
        """
        Change of variables E[F(φω)] = E[F(ω)p_φ(ω)], normalization E[p_φ] = 1
        and the Laplace functional of φ*π against that of π_{φ*σ}^τ.
        """
        calc = self.calculus
        image_target = calc.image_laplace_target(phi, f)

        def functional(batch):
            moved = pushforward(batch, phi.generator, phi.time)
            density = calc.rn_density(phi, batch)
            return np.stack(
                [
                    F.evaluate(moved) - F.evaluate(batch) * density,
                    density,
                    np.exp(pair(moved, f, "marked")),
                ],
                axis=1,
            )

        change, norm, image = self.mc_expect(
            functional, self.compound_draw(), n, self._base("quasi_invariance")
        )
        return [
            self._report("quasi_invariance[change]", "quasi-invariance", change, 0.0, n, t=phi.time),
            self._report("quasi_invariance[normalization]", "density-normalization", norm, 1.0, n),
            self._report("quasi_invariance[image]", "image-measure-laplace", image, image_target, n),
        ]

    def check_reduction(self, f: ScalarField, n: int) -> list[MCReport]:
        """
        τ = δ₁ reduces the compound measure to the simple one.

        Constructive: shared streams give identical positions. Statistical:
        moments and the Laplace value of ⟨ω,f⟩ against ⟨γ,f⟩ from
        independent streams (two-sample z-tests).
        """
        unit = PointMassLaw(1.0, 1.0)
        k = min(n, 1000)
        gen_a = RandomStream(self.seed, self._base("reduction", 0)).generator()
        gen_b = RandomStream(self.seed, self._base("reduction", 0)).generator()
        compound = self.sampler.sample_compound_batch(unit, self.window, gen_a, k)
        simple = self.sampler.sample_simple_batch(1.0, self.window, gen_b, k)
        same = compound.points.shape == simple.points.shape and np.array_equal(
            compound.points, simple.points
        ) and np.array_equal(compound.owner, simple.owner)
        reports = [
            MCReport.deterministic(
                "reduction[positions]", "unit-mark-reduction", 0.0 if same else math.inf, 0.0, k,
                self.seed,
            )
        ]

        def columns(weighting):
            def functional(batch):
                x = pair(batch, f, weighting)
                return np.stack([x, x * x, np.exp(x)], axis=1)

            return functional

        left = self.mc_expect(columns("marked"), self.compound_draw(unit), n, self._base("reduction", 1))
        right = self.mc_expect(columns("unmarked"), self.simple_draw(), n, self._base("reduction", 2))
        for label, a, b in zip(("first", "second", "laplace"), left, right, strict=True):
            reports.append(
                MCReport.two_sample(
                    f"reduction[{label}]", "unit-mark-reduction", a.mean, a.stderr, b.mean,
                    b.stderr, n, self.seed, self.z_max,
                )
            )
        return reports

    def check_count_law(self, n: int) -> list[MCReport]:
        """P[N_Λ = k] = σ(Λ)^k e^{-σ(Λ)}/k! for k = 0, 1, 2."""
        if self.fixture.marks is not None:
            draw, mean = self.marked_draw(), self.sampler.mass(self.window)
        else:
            draw = self.compound_draw()
            mean = self.fixture.tau.total_mass * self.sampler.mass(self.window)

        def functional(batch):
            counts = batch.counts()
            return np.stack([counts == k for k in range(3)], axis=1).astype(float)

        rows = self.mc_expect(functional, draw, n, self._base("count_law"))
        return [
            self._report(f"count_law[{k}]", "poisson-count-law", m, float(stats.poisson.pmf(k, mean)), n)
            for k, m in enumerate(rows)
        ]

    def check_consistency(self, inner: Window, n: int) -> list[MCReport]:
        """Counts of restrict(sample over Λ, Λ₁) against samples drawn on Λ₁ directly."""

        def restricted(batch):
            counts = restrict(batch, inner).counts().astype(float)
            return np.stack([counts, counts == 0], axis=1).astype(float)

        def direct(batch):
            counts = batch.counts().astype(float)
            return np.stack([counts, counts == 0], axis=1).astype(float)

        left = self.mc_expect(restricted, self.compound_draw(), n, self._base("consistency", 0))
        right = self.mc_expect(
            direct, self.compound_draw(window=inner), n, self._base("consistency", 1)
        )
        return [
            MCReport.two_sample(
                f"consistency[{label}]", "projective-consistency", a.mean, a.stderr, b.mean,
                b.stderr, n, self.seed, self.z_max,
            )
            for label, a, b in zip(("mean", "empty"), left, right, strict=True)
        ]

    # ------------------------------------------------------------------
    # Representation and commutators
    # ------------------------------------------------------------------

    def check_commutation(
        self,
        v1: CompactVectorField,
        v2: CompactVectorField,
        F: CylinderFunction,
        omegas: list[MarkedConfiguration],
        tolerance: float = 1e-6,
        f: ScalarField | None = None,
    ) -> list[MCReport]:
        """
        [A(v₁), A(v₂)]F = A([v₁, v₂])F on each configuration, plus the
        multiplication commutator, the flow difference quotient of V(φ_t)
        against A(v) and the flow-commutator oracle for the bracket.
        """
        calc = self.calculus
        batch = Ensemble.from_configurations(omegas)
        bracket = lie_bracket(v1, v2)

        a2 = calc.lift_A_expression(v2, F)
        a1 = calc.lift_A_expression(v1, F)
        left = calc.lift_A_expression(v1, a2).evaluate(batch) - calc.lift_A_expression(
            v2, a1
        ).evaluate(batch)
        right = calc.lift_A_expression(bracket, F).evaluate(batch)
        nested = float(np.max(np.abs(left - right) / np.maximum(1.0, np.abs(right))))
        reports = [
            MCReport.deterministic(
                "commutation[nested]", "lie-algebra-representation", nested, tolerance,
                len(omegas), self.seed,
            )
        ]

        f = f if f is not None else F.directions[0]
        weight = MarkedPair(f)
        product = F.expression
        lhs = calc.lift_A_expression(v1, make_product([weight, product])).evaluate(batch)
        rhs = weight.evaluate(batch) * calc.lift_A_expression(v1, F).evaluate(batch) + pair(
            batch, DirectionalField(f, v1), "marked"
        ) * F.evaluate(batch)
        multiplication = float(np.max(np.abs(lhs - rhs)))
        reports.append(
            MCReport.deterministic(
                "commutation[multiplication]", "multiplication-commutator", multiplication, 1e-10,
                len(omegas), self.seed,
            )
        )

        symbolic = calc.lift_A_apply(v1, F, batch, method="symbolic")
        finite = calc.lift_A_apply(v1, F, batch, method="flow_fd")
        generator = float(np.max(np.abs(symbolic - finite) / np.maximum(1.0, np.abs(symbolic))))
        reports.append(
            MCReport.deterministic(
                "commutation[generator_flow]", "unitary-group-generator", generator, tolerance,
                len(omegas), self.seed,
            )
        )

        probes = batch.points if batch.n_atoms else self._center()[None, :]
        oracle = bracket_by_flows(v1, v2, probes, BRACKET_STEP)
        exact = bracket.value(probes)
        scale = max(1.0, float(np.max(np.abs(exact))))
        reports.append(
            MCReport.deterministic(
                "commutation[bracket_flow]", "lie-bracket-flows",
                float(np.max(np.abs(oracle - exact))) / scale, 1e-4, probes.shape[0], self.seed,
            )
        )
        return reports

    def check_directional(
        self,
        functions: list[CylinderFunction],
        fields: list[CompactVectorField],
        omegas: list[MarkedConfiguration],
        tolerance: float = 1e-6,
    ) -> MCReport:
        """Analytic ∇_v F against the flow central difference on every fixture."""
        batch = Ensemble.from_configurations(omegas)
        worst = 0.0
        for F in functions:
            for v in fields:
                analytic = self.calculus.directional_derivative(F, v, batch, "analytic")
                finite = self.calculus.directional_derivative(F, v, batch, "flow_fd")
                worst = max(
                    worst, float(np.max(np.abs(analytic - finite) / (1.0 + np.abs(analytic))))
                )
        return MCReport.deterministic(
            "directional", "directional-derivative", worst, tolerance, len(omegas), self.seed,
            pairs=len(functions) * len(fields),
        )

    # ------------------------------------------------------------------
    # Dynamics
    # ------------------------------------------------------------------

    def check_stationarity(
        self, F: CylinderFunction, tau: MarkLaw, mode: str, T: float, dt: float, n: int
    ) -> MCReport:
        """E[F(Ξ_T)] against E[F(Ξ_0)] with Ξ_0 drawn from the equilibrium measure."""
        start = SampleMoments.empty()
        end = SampleMoments.empty()
        chunk = settings.chunk_size
        for k, offset in enumerate(range(0, n, chunk)):
            size = min(chunk, n - offset)
            base = self._base("stationarity", 0) + k
            initial = self.compound_draw(tau)(RandomStream(self.seed, base).generator(), size)
            motion = RandomStream(self.seed, self._base("stationarity", 1) + k)
            states = self.dynamics.simulate(initial, dt, T, mode, motion, stride=max(1, round(T / dt)))
            start = start.merge(SampleMoments.from_samples(F.evaluate(initial)))
            end = end.merge(SampleMoments.from_samples(F.evaluate(states[-1].configuration)))
        return MCReport.two_sample(
            f"stationarity[{mode}]", "equilibrium-process", end.mean, end.stderr, start.mean,
            start.stderr, n, self.seed, self.z_max, T=T, dt=dt,
        )

    def check_generator(
        self,
        F: CylinderFunction,
        omega: MarkedConfiguration,
        mode: str,
        dt_list,
        replicas: int,
        target_mode: str | None = None,
    ) -> MCReport:
        """generator_estimate against -HF(ω) for the mode-matched (or a given) operator."""
        operator = MATCHED_DIRICHLET_MODE[mode] if target_mode is None else target_mode
        target = -self.calculus.dirichlet_apply(F, omega, operator)
        offset = (("mark_weighted", "unit").index(mode) * len(DIRICHLET_MODES)) + DIRICHLET_MODES.index(operator)
        rng = RandomStream(self.seed, self._base("generator", offset))
        result = self.dynamics.generator_estimate(F, omega, mode, dt_list, replicas, rng)
        return MCReport.monte_carlo(
            f"generator[{mode},{operator}]",
            "generator-identification",
            result.estimate,
            result.stderr,
            target,
            replicas,
            self.seed,
            self.z_max,
            inconclusive=result.inconclusive,
            per_step=[list(p) for p in result.per_step],
        )

    # ------------------------------------------------------------------
    # Suites
    # ------------------------------------------------------------------

    def _inner_window(self) -> Window:
        lo, hi = self.window.lower_array, self.window.upper_array
        quarter = 0.25 * (hi - lo)
        return Window.from_bounds(lo + quarter, hi - quarter)

    def _center(self) -> np.ndarray:
        return 0.5 * (self.window.lower_array + self.window.upper_array)

    def _probe(self) -> MarkedConfiguration:
        probe = self.fixture.probe()
        if probe is not None:
            return probe
        return MarkedConfiguration(self._center()[None, :], np.array([2.0]), self.fixture.dimension)

    def run_check(self, check: str) -> list[MCReport]:
        """Run one named check on the fixture with the job's sample sizes."""
        fx = self.fixture
        job = fx.config.job
        n = job.n
        bumps = fx.bump_list()
        f = bumps[0]
        g = bumps[1] if len(bumps) > 1 else bumps[0]
        fields = fx.field_list()

        with LogExecutionTime(logger, f"check {check}"):
            if check == "laplace":
                reports = [self.check_laplace(f, "simple", n), self.check_laplace(f, "compound", n)]
                if fx.marks is not None and fx.marked_test is not None:
                    reports.append(self.check_laplace(fx.marked_test, "marked", n))
                return reports
            if check == "moments":
                return self.check_moments(f, fx.tau, n)
            if check == "covariance":
                return [self.check_covariance(f, g, fx.tau, n)]
            if check == "ibp":
                return [
                    self.check_ibp(F, G, v, n, index=k)
                    for k, (F, G, v) in enumerate(fx.ibp_triples())
                ]
            if check == "divergence":
                return [self.check_divergence(fx.vector_field(), fx.primary(), n)]
            if check == "symmetry":
                return [self.check_symmetry(fx.primary(), fx.secondary(), fx.tau, "omega_metric", 2 * n)]
            if check == "quasi_invariance":
                phi = Diffeo(fields[0], job.flow_time)
                return self.check_quasi_invariance(phi, fx.primary(), f, n)
            if check == "reduction":
                return self.check_reduction(f, n)
            if check == "count_law":
                return self.check_count_law(n)
            if check == "consistency":
                return self.check_consistency(self._inner_window(), n)
            if check == "commutation":
                v2 = fields[1] if len(fields) > 1 else fields[0]
                omegas = self._sample_configurations(job.configurations, "commutation")
                return self.check_commutation(fields[0], v2, fx.primary(), omegas, job.tolerance, f)
            if check == "directional":
                omegas = self._sample_configurations(job.configurations, "directional")
                return [self.check_directional(fx.function_list(), fields, omegas, job.tolerance)]
            if check == "underlying_form":
                return [self.check_underlying_form(f, g)]
            if check == "stationarity":
                return [
                    self.check_stationarity(
                        fx.primary(), fx.tau, job.mode, job.T, job.dt, max(settings.min_replicas, n // 4)
                    )
                ]
            if check == "generator":
                return [self.check_generator(fx.primary(), self._probe(), job.mode, job.dt_list, job.replicas)]
        raise ValueError(f"unknown check: {check}")

    def run_suite(self, check: str = "all") -> list[MCReport]:
        names = CHECK_NAMES if check == "all" else (check,)
        reports: list[MCReport] = []
        for name in names:
            reports.extend(self.run_check(name))
        return reports

    def adjudicate(self) -> tuple[list[MCReport], dict[str, bool]]:
        """
        Discriminate the Dirichlet operator conventions.

        Symmetry is tested in every mode with the fixture's τ and with τ = δ₁;
        the mark-weighted dynamics' generator is compared with each mode's
        operator, and the unit dynamics' with the gamma metric one. The
        verdict maps each mode to whether all of its rows passed.
        """
        fx = self.fixture
        job = fx.config.job
        F, G = fx.primary(), fx.secondary()
        unit = PointMassLaw(1.0, 1.0)
        reports: list[MCReport] = []
        verdict: dict[str, bool] = {}
        for mode in DIRICHLET_MODES:
            rows = [
                self.check_symmetry(F, G, fx.tau, mode, 2 * job.n, label="tau"),
                self.check_symmetry(F, G, unit, mode, job.n, label="unit-marks", index=1),
                self.check_generator(F, self._probe(), "mark_weighted", job.dt_list, job.replicas, mode),
            ]
            verdict[mode] = all(r.passed for r in rows)
            reports.extend(rows)
        reports.append(
            self.check_generator(F, self._probe(), "unit", job.dt_list, job.replicas, "gamma_metric")
        )
        for mode, ok in verdict.items():
            logger.info(f"adjudication: {mode} {'passes' if ok else 'fails'}")
        return reports, verdict


def bracket_by_flows(
    v1: CompactVectorField, v2: CompactVectorField, points: np.ndarray, step: float
) -> np.ndarray:
    """
    [v₁, v₂](x) from the flow commutator φ^{v₂}_{-s}∘φ^{v₁}_{-s}∘φ^{v₂}_s∘φ^{v₁}_s(x) - x ≈ s²[v₁, v₂].

    The quotients for s and -s are averaged, which cancels the odd-order error.
    """

    def quotient(s: float) -> np.ndarray:
        y = flow(v1, s, points).endpoint
        y = flow(v2, s, y).endpoint
        y = flow(v1, -s, y).endpoint
        y = flow(v2, -s, y).endpoint
        return (y - points) / (s * s)

    return 0.5 * (quotient(step) + quotient(-step))

