"""
Equilibrium diffusion of compound configurations.

Every atom moves independently with marks frozen. In ``mark_weighted`` mode
an atom of mark s follows dX = (β^σ/s) dt + √(2/s) dW, whose generator on
cylinder functions is -H in the omega metric; ``unit`` mode ignores the mark,
dX = β^σ dt + √2 dW, and realizes the gamma metric operator. Walls of the
domain window reflect.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from app.core.config import settings
from app.core.errors import DomainError
from app.domain.configuration import Ensemble, MarkedConfiguration
from app.domain.cylinder import CylinderFunction, GradientSection
from app.domain.space import IntensityDensity
from app.services.sampler_service import RandomStream
from app.utils.numerics import SampleMoments, reflect_into

logger = logging.getLogger(__name__)

DynamicsMode = Literal["mark_weighted", "unit"]
DYNAMICS_MODES: tuple[DynamicsMode, ...] = ("mark_weighted", "unit")

# Dirichlet operator realized by each dynamics mode.
MATCHED_DIRICHLET_MODE = {"mark_weighted": "omega_metric", "unit": "gamma_metric"}

# Stream offset between the replica chunks of successive time steps.
CHUNKS_PER_STEP = 2**20


@dataclass(frozen=True)
class TrajectoryState:
    """Time and configuration (or ensemble of configurations) of a trajectory."""

    time: float
    configuration: MarkedConfiguration | Ensemble


@dataclass(frozen=True)
class GeneratorEstimate:
    """Extrapolated generator value with its standard error and per-step estimates."""

    estimate: float
    stderr: float
    inconclusive: bool
    per_step: list[tuple[float, float, float]] = field(default_factory=list)
    replicas: int = 0


class DynamicsService:
    """Euler-Maruyama simulation of the equilibrium process."""

    def __init__(self, rho: IntensityDensity):
        self.rho = rho
        self.window = rho.domain

    def _check_dt(self, dt: float) -> None:
        if not (0.0 < dt <= settings.max_dt):
            raise DomainError(
                "Time step outside (0, max_dt]", data={"dt": dt, "max_dt": settings.max_dt}
            )

    def _scales(self, batch: Ensemble, mode: DynamicsMode) -> np.ndarray:
        """Per-atom speed factor 1/s (mark_weighted) or 1 (unit)."""
        if mode == "unit":
            return np.ones(batch.n_atoms)
        if mode != "mark_weighted":
            raise ValueError(f"unknown dynamics mode: {mode}")
        if batch.marks.ndim != 1:
            raise DomainError("mark_weighted dynamics needs scalar marks")
        return 1.0 / batch.marks

    def _advance(
        self, batch: Ensemble, dt: float, mode: DynamicsMode, noise: np.ndarray
    ) -> tuple[Ensemble, np.ndarray]:
        """One step from given standard normal noise; also returns the diffusion increments."""
        if batch.n_atoms == 0:
            return batch, np.zeros(batch.points.shape)
        speed = self._scales(batch, mode)
        drift = self.rho.beta(batch.points) * speed[:, None] * dt
        diffusion = np.sqrt(2.0 * dt * speed)[:, None] * noise
        moved = reflect_into(batch.points + drift + diffusion, self.window)
        return batch.with_points(moved), diffusion

    def em_step(
        self,
        state: TrajectoryState,
        dt: float,
        mode: DynamicsMode,
        rng: RandomStream | np.random.Generator,
    ) -> TrajectoryState:
        """
        Advance every atom by one Euler-Maruyama step of length ``dt``.

        Raises:
            DomainError: If dt is not in (0, max_dt]
        """
        self._check_dt(dt)
        gen = rng.generator() if isinstance(rng, RandomStream) else rng
        single = isinstance(state.configuration, MarkedConfiguration)
        batch = state.configuration.as_ensemble() if single else state.configuration
        noise = gen.standard_normal(batch.points.shape)
        moved, _ = self._advance(batch, dt, mode, noise)
        config = moved.configuration(0) if single else moved
        return TrajectoryState(time=state.time + dt, configuration=config)

    def simulate(
        self,
        omega0: MarkedConfiguration | Ensemble,
        dt: float,
        T: float,
        mode: DynamicsMode,
        rng: RandomStream,
        stride: int = 1,
    ) -> list[TrajectoryState]:
        """
        Iterate em_step up to time T = k·dt, recording every ``stride``-th state.

        The initial and the final state are always recorded.
        """
        self._check_dt(dt)
        steps = round(T / dt)
        if T < 0 or abs(steps * dt - T) > 1e-9 * max(1.0, T):
            raise DomainError("T must be a non-negative multiple of dt", data={"T": T, "dt": dt})
        gen = rng.generator()
        state = TrajectoryState(time=0.0, configuration=omega0)
        states = [state]
        for k in range(1, steps + 1):
            state = self.em_step(state, dt, mode, gen)
            state = TrajectoryState(time=k * dt, configuration=state.configuration)
            if k % stride == 0 or k == steps:
                states.append(state)
        logger.debug(f"Simulated {steps} steps in {mode} mode")
        return states

    def _position_gradient(self, F: CylinderFunction, batch: Ensemble) -> np.ndarray:
        """∂F/∂x at each atom: s_x·∇^Ω F(x) (marks enter through the pairings)."""
        grad = GradientSection(F).on_atoms(batch)
        if batch.marks.ndim == 1:
            grad = grad * batch.marks[:, None]
        return grad

    def generator_estimate(
        self,
        F: CylinderFunction,
        omega: MarkedConfiguration,
        mode: DynamicsMode,
        dt_list,
        replicas: int,
        rng: RandomStream,
    ) -> GeneratorEstimate:
        """
        Estimate (LF)(ω) = lim (E[F(Ξ_dt) | Ξ_0 = ω] - F(ω)) / dt.

        For each dt, one step is taken from ``replicas`` copies of ω and the Itô
        martingale increment Σ_x ∂_x F·√(2 dt s_x⁻¹) ξ_x is subtracted as a
        control variate. The per-dt means are then extrapolated to dt = 0 by a
        weighted least-squares fit e(dt) = L + c·dt.

        Raises:
            DomainError: If fewer than two distinct steps are given
        """
        steps = sorted({float(dt) for dt in dt_list}, reverse=True)
        if len(steps) < 2:
            raise DomainError("Richardson extrapolation needs at least two time steps")
        for dt in steps:
            self._check_dt(dt)

        base_value = float(F.evaluate(omega.as_ensemble())[0])
        per_step: list[tuple[float, float, float]] = []
        for index, dt in enumerate(steps):
            moments = SampleMoments.empty()
            for start in range(0, replicas, settings.chunk_size):
                size = min(settings.chunk_size, replicas - start)
                chunk = start // settings.chunk_size
                gen = rng.child(index * CHUNKS_PER_STEP + chunk).generator()
                batch = Ensemble.replicate(omega, size)
                noise = gen.standard_normal(batch.points.shape)
                moved, diffusion = self._advance(batch, dt, mode, noise)
                control = np.zeros(size)
                if batch.n_atoms:
                    control = batch.per_configuration_sum(
                        np.einsum("mi,mi->m", self._position_gradient(F, batch), diffusion)
                    )
                values = (F.evaluate(moved) - base_value - control) / dt
                moments = moments.merge(SampleMoments.from_samples(values))
            per_step.append((dt, moments.mean, moments.stderr))

        estimate, stderr = _extrapolate(per_step)
        inconclusive = stderr > settings.inconclusive_ratio * abs(estimate)
        if inconclusive:
            logger.warning(f"Generator estimate {estimate} has standard error {stderr}")
        return GeneratorEstimate(
            estimate=estimate,
            stderr=stderr,
            inconclusive=inconclusive,
            per_step=per_step,
            replicas=replicas,
        )


def _extrapolate(per_step: list[tuple[float, float, float]]) -> tuple[float, float]:
    """Weighted least-squares intercept of e(dt) = L + c·dt and its standard error."""
    dts = np.array([p[0] for p in per_step])
    means = np.array([p[1] for p in per_step])
    errors = np.array([p[2] for p in per_step])
    if np.all(errors == 0.0):
        weights = np.ones_like(errors)
    else:
        floor = errors[errors > 0].min() if np.any(errors > 0) else 1.0
        weights = 1.0 / np.maximum(errors, floor) ** 2
    design = np.stack([np.ones_like(dts), dts], axis=1)
    normal = design.T @ (weights[:, None] * design)
    coef = np.linalg.solve(normal, design.T @ (weights * means))
    # covariance of the intercept from the propagated per-step errors
    gain = np.linalg.solve(normal, (design * weights[:, None]).T)
    variance = float(np.sum(gain[0] ** 2 * errors**2))
    return float(coef[0]), math.sqrt(variance)
