"""
Numerical helpers shared by the services.

This module contains the box quadrature wrapper, the fixed-step RK4 flow
integrator, mergeable sample moments, and the z statistics used by every
Monte Carlo check.
"""

from __future__ import annotations

import math
import warnings
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, nquad, quad
from scipy.stats import norm

from app.core.errors import FlowIntegrationError, QuadratureError
from app.schemas.window import Window

# Beyond this many substeps the requested horizon is not a usable flow time.
MAX_FLOW_SUBSTEPS = 10_000_000


def integrate_box(
    integrand: Callable[[np.ndarray], np.ndarray],
    window: Window,
    *,
    rtol: float,
    atol: float = 1e-12,
    limit: int = 200,
) -> float:
    """
    Integrate a vectorized function over a box with adaptive QUADPACK rules.

    Args:
        integrand: Maps an (m, d) array of points to an (m,) array
        window: Integration box
        rtol: Relative tolerance per axis
        atol: Absolute tolerance per axis
        limit: Maximum subintervals per axis

    Returns:
        The integral estimate

    Raises:
        QuadratureError: If the tolerance is not reached; carries the estimate
    """

    def scalar(*coords: float) -> float:
        return float(integrand(np.asarray(coords, dtype=float)[None, :])[0])

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", IntegrationWarning)
        value, abserr = nquad(
            scalar, window.ranges, opts={"epsrel": rtol, "epsabs": atol, "limit": limit}
        )

    problems = [w for w in caught if issubclass(w.category, IntegrationWarning)]
    if problems or not math.isfinite(value):
        raise QuadratureError(
            message="Quadrature tolerance not reached",
            data={
                "estimate": value,
                "abserr": abserr,
                "warning": str(problems[0].message) if problems else None,
            },
        )
    return float(value)


def integrate_line(
    func: Callable[[float], float],
    a: float,
    b: float,
    *,
    rtol: float,
    atol: float = 1e-12,
    limit: int = 200,
) -> float:
    """Adaptive 1-D quadrature on [a, b] (infinite ends allowed)."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", IntegrationWarning)
        value, abserr = quad(func, a, b, epsrel=rtol, epsabs=atol, limit=limit)

    problems = [w for w in caught if issubclass(w.category, IntegrationWarning)]
    if problems or not math.isfinite(value):
        raise QuadratureError(
            message="Quadrature tolerance not reached",
            data={
                "estimate": value,
                "abserr": abserr,
                "warning": str(problems[0].message) if problems else None,
            },
        )
    return float(value)


def rk4_flow(
    velocity: Callable[[np.ndarray], np.ndarray],
    rate: Callable[[np.ndarray], np.ndarray],
    points: np.ndarray,
    t: float,
    max_step: float,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Integrate dy/dt = velocity(y) together with dl/dt = rate(y).

    The step count is ceil(|t| / max_step) and the substep is t / steps, so a
    given (t, max_step) always produces the same arithmetic.

    Args:
        velocity: (m, d) -> (m, d)
        rate: (m, d) -> (m,) accumulated along the trajectory
        points: Initial states, shape (m, d)
        t: Flow time (any sign)
        max_step: Upper bound on the substep length

    Returns:
        (endpoints, accumulated rate integral)
    """
    y = np.array(points, dtype=float, copy=True)
    acc = np.zeros(y.shape[0])
    if t == 0.0 or y.shape[0] == 0:
        return y, acc
    if not math.isfinite(t):
        raise FlowIntegrationError("Flow time must be finite", data={"t": t})

    steps = math.ceil(abs(t) / max_step)
    if steps > MAX_FLOW_SUBSTEPS:
        raise FlowIntegrationError(
            "Flow substep underflow", data={"t": t, "max_step": max_step, "steps": steps}
        )
    h = t / steps

    for _ in range(steps):
        k1 = velocity(y)
        r1 = rate(y)
        y2 = y + 0.5 * h * k1
        k2 = velocity(y2)
        r2 = rate(y2)
        y3 = y + 0.5 * h * k2
        k3 = velocity(y3)
        r3 = rate(y3)
        y4 = y + h * k3
        k4 = velocity(y4)
        r4 = rate(y4)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        acc = acc + (h / 6.0) * (r1 + 2.0 * r2 + 2.0 * r3 + r4)

    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(acc))):
        raise FlowIntegrationError("Flow produced non-finite state", data={"t": t})
    return y, acc


def reflect_into(points: np.ndarray, window: Window) -> np.ndarray:
    """Fold points back into the box by mirror reflection at the walls."""
    lo = window.lower_array
    width = window.widths
    u = np.mod(points - lo, 2.0 * width)
    return lo + np.where(u > width, 2.0 * width - u, u)


@dataclass(frozen=True)
class SampleMoments:
    """Count, mean and centered sum of squares; merges associatively."""

    count: int
    mean: float
    m2: float

    @classmethod
    def empty(cls) -> SampleMoments:
        return cls(count=0, mean=0.0, m2=0.0)

    @classmethod
    def from_samples(cls, values: np.ndarray) -> SampleMoments:
        values = np.asarray(values, dtype=float)
        n = values.size
        if n == 0:
            return cls.empty()
        # numpy reductions use pairwise summation
        mean = float(np.mean(values))
        m2 = float(np.sum((values - mean) ** 2))
        return cls(count=n, mean=mean, m2=m2)

    def merge(self, other: SampleMoments) -> SampleMoments:
        if self.count == 0:
            return other
        if other.count == 0:
            return self
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / n
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / n
        return SampleMoments(count=n, mean=mean, m2=m2)

    @property
    def variance(self) -> float:
        if self.count < 2:
            return 0.0
        return self.m2 / (self.count - 1)

    @property
    def stderr(self) -> float:
        if self.count < 2:
            return 0.0
        return math.sqrt(self.variance / self.count)


def z_score(estimate: float, stderr: float, target: float) -> float:
    """(estimate - target) / stderr with the degenerate cases pinned."""
    diff = estimate - target
    if diff == 0.0:
        return 0.0
    if stderr == 0.0:
        return math.copysign(math.inf, diff)
    return diff / stderr


def two_sample_z(
    mean_a: float, se_a: float, mean_b: float, se_b: float
) -> tuple[float, float, float]:
    """Difference of two independent estimates, its standard error and z statistic."""
    se = math.hypot(se_a, se_b)
    return mean_a - mean_b, se, z_score(mean_a - mean_b, se, 0.0)


def expected_false_failures(rows: int, z_max: float) -> float:
    """Mean number of |z| >= z_max rows among ``rows`` correct Monte Carlo rows."""
    return rows * 2.0 * float(norm.sf(z_max))
