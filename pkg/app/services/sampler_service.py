"""
Poisson, compound Poisson and marked Poisson samplers.

Counts are drawn with numpy's exact Poisson sampler and positions by
rejection from the uniform law on the window against an envelope of ρ.
Every draw goes through a RandomStream, a Philox generator keyed by
(seed, stream_id), so replicas split into chunks are reproducible no matter
how the chunks are scheduled.
"""

import logging
import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from app.core.config import settings
from app.core.errors import DomainError, EnvelopeError, NonFiniteSampleError
from app.domain.configuration import Ensemble, MarkedConfiguration, SimpleConfiguration
from app.domain.marks import MarkLaw, VectorMarkLaw
from app.domain.space import IntensityDensity, sigma_mass
from app.schemas.window import Window
from app.utils.numerics import SampleMoments

logger = logging.getLogger(__name__)

# Stream ids of different checks never collide below this chunk count.
STREAMS_PER_CHECK = 2**32


@dataclass(frozen=True)
class RandomStream:
    """Counter-based stream; equal (seed, stream_id) give equal draws."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.Philox(sequence))

    def child(self, offset: int) -> "RandomStream":
        return RandomStream(self.seed, self.stream_id + offset)


def stream_base(check_index: int) -> int:
    """First stream id owned by the check at ``check_index``."""
    return check_index * STREAMS_PER_CHECK


class SamplerService:
    """
    Draw configurations of π_σ, π_σ^τ and μ_{σ⊗τ} on sub-windows of ρ's domain.

    σ-masses and validated envelopes are cached per window.
    """

    def __init__(self, rho: IntensityDensity, envelope: float | None = None):
        self.rho = rho
        self.envelope_override = envelope
        self._masses: dict[Window, float] = {}
        self._envelopes: dict[Window, float] = {}

    # ------------------------------------------------------------------
    # Window data
    # ------------------------------------------------------------------

    def mass(self, window: Window) -> float:
        if window not in self._masses:
            self._masses[window] = sigma_mass(self.rho, window)
        return self._masses[window]

    def envelope(self, window: Window) -> float:
        """
        A bound on sup_Λ ρ, checked against quasi-random probes.

        The bound is the supplied override, the family's exact supremum, or
        the probe maximum times the configured margin.

        Raises:
            EnvelopeError: If a probe exceeds a supplied or exact bound
        """
        if window in self._envelopes:
            return self._envelopes[window]

        probes = qmc.Halton(d=window.dimension, scramble=False).random(settings.envelope_probes)
        points = qmc.scale(probes, window.lower_array, window.upper_array)
        values = self.rho.value(points)
        peak = float(values.max())

        bound = self.envelope_override
        if bound is None:
            bound = self.rho.supremum(window)
        if bound is None:
            bound = peak * settings.envelope_margin
            logger.info(f"Estimated envelope {bound} on {window.ranges}")
        elif peak > bound:
            worst = int(values.argmax())
            raise EnvelopeError(
                "Density exceeds the rejection envelope",
                data={"point": points[worst].tolist(), "value": peak, "envelope": bound},
            )
        self._envelopes[window] = bound
        return bound

    # ------------------------------------------------------------------
    # Positions
    # ------------------------------------------------------------------

    def _positions(self, gen: np.random.Generator, total: int, window: Window) -> np.ndarray:
        """``total`` i.i.d. points with density ρ/σ(Λ) on the window."""
        d = window.dimension
        out = np.empty((total, d))
        if total == 0:
            return out
        bound = self.envelope(window)
        acceptance = self.mass(window) / (bound * window.volume)
        filled = 0
        while filled < total:
            needed = total - filled
            batch = int(math.ceil(needed / acceptance * 1.1)) + 16
            proposals = gen.uniform(window.lower_array, window.upper_array, size=(batch, d))
            values = self.rho.value(proposals)
            if np.any(values > bound):
                raise EnvelopeError(
                    "Density exceeds the rejection envelope",
                    data={"value": float(values.max()), "envelope": bound},
                )
            accepted = proposals[gen.uniform(0.0, bound, size=batch) < values][:needed]
            out[filled : filled + accepted.shape[0]] = accepted
            filled += accepted.shape[0]
        return out

    def _ground(
        self, gen: np.random.Generator, scale: float, window: Window, size: int
    ) -> tuple[np.ndarray, np.ndarray]:
        counts = gen.poisson(scale * self.mass(window), size=size)
        points = self._positions(gen, int(counts.sum()), window)
        owner = np.repeat(np.arange(size, dtype=np.int64), counts)
        return points, owner

    # ------------------------------------------------------------------
    # Samplers
    # ------------------------------------------------------------------

    def sample_simple_batch(
        self, intensity_scale: float, window: Window, gen: np.random.Generator, size: int
    ) -> Ensemble:
        """``size`` configurations of π_{scale·σ}, unit marks."""
        if intensity_scale <= 0:
            raise ValueError("intensity scale must be positive")
        points, owner = self._ground(gen, intensity_scale, window, size)
        return Ensemble(points, np.ones(points.shape[0]), owner, size)

    def sample_compound_batch(
        self, tau: MarkLaw, window: Window, gen: np.random.Generator, size: int
    ) -> Ensemble:
        """
        ``size`` configurations of π_σ^τ.

        Positions are drawn exactly as sample_simple_batch with scale λ_τ, and
        only then the marks, so τ = δ_1 reproduces the simple sampler's
        positions under a shared stream.
        """
        points, owner = self._ground(gen, tau.total_mass, window, size)
        marks = tau.sample_normalized(gen, points.shape[0]).astype(float)
        return Ensemble(points, marks, owner, size)

    def sample_marked_batch(
        self, marks: VectorMarkLaw, window: Window, gen: np.random.Generator, size: int
    ) -> Ensemble:
        """``size`` configurations of the marked Poisson measure with marks in R^q."""
        points, owner = self._ground(gen, 1.0, window, size)
        mark_values = marks.sample(gen, points.shape[0]).reshape(points.shape[0], marks.dimension)
        return Ensemble(points, mark_values, owner, size)

    def sample_simple(
        self, intensity_scale: float, window: Window, rng: RandomStream
    ) -> SimpleConfiguration:
        batch = self.sample_simple_batch(intensity_scale, window, rng.generator(), 1)
        return SimpleConfiguration(batch.points, window.dimension)

    def sample_compound(self, tau: MarkLaw, window: Window, rng: RandomStream) -> MarkedConfiguration:
        return self.sample_compound_batch(tau, window, rng.generator(), 1).configuration(0)

    def sample_marked(
        self, marks: VectorMarkLaw, window: Window, rng: RandomStream
    ) -> MarkedConfiguration:
        return self.sample_marked_batch(marks, window, rng.generator(), 1).configuration(0)

    # ------------------------------------------------------------------
    # Replication
    # ------------------------------------------------------------------

    def replicate(
        self,
        draw: Callable[[np.random.Generator, int], Ensemble],
        functional: Callable[[Ensemble], np.ndarray],
        n: int,
        seed: int,
        base: int = 0,
    ) -> list[SampleMoments]:
        """
        Moments of ``functional`` over ``n`` i.i.d. configurations.

        The replicas are split into chunks of ``settings.chunk_size``; chunk k
        uses stream ``base + k``. ``functional`` maps an ensemble to an (n,)
        or (n, k) array; one SampleMoments is returned per column. Chunks are
        merged in index order, so the result does not depend on the worker
        count.

        Raises:
            DomainError: If ``n`` is not positive
            NonFiniteSampleError: If the functional returns NaN or infinity
        """
        if n < 1:
            raise DomainError("replicate needs at least one replica", data={"n": n})
        chunk = settings.chunk_size
        sizes = [min(chunk, n - start) for start in range(0, n, chunk)]

        def run_chunk(index: int) -> list[SampleMoments]:
            stream = RandomStream(seed, base + index)
            batch = draw(stream.generator(), sizes[index])
            values = np.asarray(functional(batch), dtype=float)
            values = values.reshape(sizes[index], -1)
            if not np.all(np.isfinite(values)):
                raise NonFiniteSampleError(
                    "Functional returned a non-finite value",
                    data={"seed": seed, "stream_id": stream.stream_id},
                )
            return [SampleMoments.from_samples(col) for col in values.T]

        if settings.workers > 1 and len(sizes) > 1:
            with ThreadPoolExecutor(max_workers=settings.workers) as pool:
                parts = list(pool.map(run_chunk, range(len(sizes))))
        else:
            parts = [run_chunk(i) for i in range(len(sizes))]

        merged = parts[0]
        for part in parts[1:]:
            merged = [a.merge(b) for a, b in zip(merged, part, strict=True)]
        return merged
