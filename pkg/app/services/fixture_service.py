"""
Turn a validated RunConfig into domain objects.

The Fixture holds everything a job needs: the domain window, ρ, τ, the
optional R^q mark law, and the named bumps, vector fields and cylinder
functions in declaration order.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from app.domain.configuration import MarkedConfiguration, MarkedTestFunction
from app.domain.cylinder import CylinderFunction, CylinderVectorField
from app.domain.expressions import OuterFunction
from app.domain.fields import ProductBump
from app.domain.marks import (
    DiscreteVectorMarks,
    GammaLaw,
    MarkLaw,
    MixtureLaw,
    PointMassLaw,
    UniformBoxMarks,
    UniformLaw,
    VectorMarkLaw,
)
from app.domain.space import (
    BumpVectorField,
    ConstantDensity,
    GaussianDensity,
    IntensityDensity,
    QuadraticDensity,
)
from app.schemas.run_config import (
    FunctionSection,
    MarksSection,
    RunConfig,
    SpaceSection,
    TauSection,
)
from app.schemas.window import Window

logger = logging.getLogger(__name__)


@dataclass
class Fixture:
    """Domain objects built from a run config."""

    config: RunConfig
    domain: Window
    rho: IntensityDensity
    tau: MarkLaw
    marks: VectorMarkLaw | None
    marked_test: MarkedTestFunction | None
    bumps: dict[str, ProductBump] = field(default_factory=dict)
    fields: dict[str, BumpVectorField] = field(default_factory=dict)
    functions: dict[str, CylinderFunction] = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    def function_list(self) -> list[CylinderFunction]:
        return list(self.functions.values())

    def field_list(self) -> list[BumpVectorField]:
        return list(self.fields.values())

    def bump_list(self) -> list[ProductBump]:
        return list(self.bumps.values())

    def primary(self) -> CylinderFunction:
        name = self.config.job.primary
        return self.functions[name] if name else self.function_list()[0]

    def secondary(self) -> CylinderFunction:
        name = self.config.job.secondary
        if name:
            return self.functions[name]
        functions = self.function_list()
        return functions[1] if len(functions) > 1 else functions[0]

    def ibp_triples(self) -> list[tuple[CylinderFunction, CylinderFunction, BumpVectorField]]:
        """Three (F, G, v) fixtures taken cyclically from the declared objects."""
        functions = self.function_list()
        fields = self.field_list()
        return [
            (functions[k % len(functions)], functions[(k + 1) % len(functions)], fields[k % len(fields)])
            for k in range(3)
        ]

    def vector_field(self) -> CylinderVectorField:
        """Σ_j G_j v_j pairing the declared functions with the declared fields."""
        functions = self.function_list()
        fields = self.field_list()
        return CylinderVectorField(list(zip(functions, fields, strict=False)) or [(functions[0], fields[0])])

    def probe(self) -> MarkedConfiguration | None:
        job = self.config.job
        if not job.probe_marks:
            return None
        points = np.asarray(job.probe_points, dtype=float).reshape(-1, self.dimension)
        return MarkedConfiguration(points, np.asarray(job.probe_marks, dtype=float), self.dimension)


class FixtureService:
    """Build densities, laws, fields and functions from config sections."""

    def build(self, config: RunConfig) -> Fixture:
        domain = Window.from_bounds(config.space.lower, config.space.upper)
        rho = self.build_density(config.space, domain)
        tau = self.build_tau(config.tau)
        bumps = {
            name: ProductBump(section.center, section.radius, section.amplitude)
            for name, section in config.bumps.items()
        }
        fields = {
            name: BumpVectorField(
                section.direction, bumps[section.bump], section.slope, section.intercept
            )
            for name, section in config.vector_fields.items()
        }
        functions = {
            name: self.build_function(name, section, bumps)
            for name, section in config.functions.items()
        }
        marks, marked_test = self.build_marks(config.marks, bumps)
        logger.info(
            f"Built fixture: {len(bumps)} bumps, {len(fields)} fields, {len(functions)} functions"
        )
        return Fixture(
            config=config,
            domain=domain,
            rho=rho,
            tau=tau,
            marks=marks,
            marked_test=marked_test,
            bumps=bumps,
            fields=fields,
            functions=functions,
        )

    def build_density(self, space: SpaceSection, domain: Window) -> IntensityDensity:
        if space.density == "constant":
            return ConstantDensity(domain, space.level)
        if space.density == "gaussian":
            return GaussianDensity(domain, space.amplitude, space.center, space.width)
        return QuadraticDensity(domain, space.offset, space.curvature, space.center)

    def build_tau(self, tau: TauSection) -> MarkLaw:
        if tau.law == "point-mass":
            return PointMassLaw(tau.location, tau.mass)
        if tau.law == "mixture":
            return MixtureLaw(tau.atoms, tau.weights)
        if tau.law == "gamma":
            return GammaLaw(tau.shape, tau.scale, tau.mass)
        return UniformLaw(tau.low, tau.high, tau.mass)

    def build_marks(
        self, section: MarksSection | None, bumps: dict[str, ProductBump]
    ) -> tuple[VectorMarkLaw | None, MarkedTestFunction | None]:
        if section is None:
            return None, None
        if section.law == "uniform-box":
            law: VectorMarkLaw = UniformBoxMarks(section.lower, section.upper)
        else:
            q = len(section.atoms) // max(len(section.probabilities), 1)
            atoms = np.asarray(section.atoms, dtype=float).reshape(-1, q)
            law = DiscreteVectorMarks(atoms, section.probabilities)
        test = None
        if section.direction:
            test = MarkedTestFunction(bumps[section.direction], section.weights, section.offset)
        return law, test

    def build_function(
        self, name: str, section: FunctionSection, bumps: dict[str, ProductBump]
    ) -> CylinderFunction:
        directions = [bumps[ref] for ref in section.directions]
        arity = len(directions)
        if section.outer == "product":
            outer = OuterFunction.product(arity, section.scale)
        else:
            weights = section.weights or (1.0,) * arity
            outer = OuterFunction.ridge(
                section.outer, weights, section.offset, section.coefficients
            )
        return CylinderFunction(outer, directions, name=name)
