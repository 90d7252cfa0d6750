"""
Smooth compactly supported scalar fields on the box domain.

Test functions (the φ of every pairing) are built from the product bump
b(x) = A Π_k h((x_k - c_k) / r_k) with h(u) = exp(1 - 1/(1 - u²)) on |u| < 1,
together with linear combinations. All partial derivatives of a product bump
factor over axes, so any order is available from the univariate derivative
table of h, which sympy generates once.

All evaluation methods are vectorized: points are (m, d) arrays.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from collections.abc import Sequence
from functools import cache

import numpy as np
import sympy as sp

from app.core.errors import DerivativeDepthError
from app.schemas.window import Window

BUMP_MAX_ORDER = 4
# Where 1 - u² falls below this the profile and its derivatives are under 1e-27.
BUMP_EDGE_MARGIN = 1e-2


@cache
def _bump_profile_derivatives() -> tuple:
    """Lambdified h, h', ..., h'''' of the univariate bump profile."""
    u = sp.Symbol("u", real=True)
    profile = sp.exp(1 - 1 / (1 - u**2))
    funcs = []
    expr = profile
    for _ in range(BUMP_MAX_ORDER + 1):
        funcs.append(sp.lambdify(u, expr, modules="numpy"))
        expr = sp.diff(expr, u)
    return tuple(funcs)


def bump_profile(u: np.ndarray, order: int = 0) -> np.ndarray:
    """h^(order)(u), identically zero for |u| >= 1."""
    if order > BUMP_MAX_ORDER:
        raise DerivativeDepthError("bump profile", order)
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = 1.0 - u * u > BUMP_EDGE_MARGIN
    if np.any(inside):
        out[inside] = _bump_profile_derivatives()[order](u[inside])
    return out


class ScalarField(ABC):
    """
    A smooth real function on X with explicit derivative data.

    ``order`` is the highest derivative order the field can evaluate;
    ``support`` is a box outside which the field and its derivatives vanish
    (None for the zero field).
    """

    dimension: int
    order: int
    support: Window | None

    @abstractmethod
    def value(self, points: np.ndarray) -> np.ndarray:
        """(m, d) -> (m,)"""

    def gradient(self, points: np.ndarray) -> np.ndarray:
        """(m, d) -> (m, d)"""
        raise DerivativeDepthError(self.describe(), 1)

    def hessian(self, points: np.ndarray) -> np.ndarray:
        """(m, d) -> (m, d, d)"""
        raise DerivativeDepthError(self.describe(), 2)

    def third(self, points: np.ndarray) -> np.ndarray:
        """(m, d) -> (m, d, d, d)"""
        raise DerivativeDepthError(self.describe(), 3)

    def laplacian(self, points: np.ndarray) -> np.ndarray:
        return np.trace(self.hessian(points), axis1=1, axis2=2)

    def require(self, order: int) -> None:
        """Raise unless derivatives up to ``order`` are available."""
        if self.order < order:
            raise DerivativeDepthError(self.describe(), order)

    @abstractmethod
    def describe(self) -> str:
        """Canonical s-expression text."""

    def __repr__(self) -> str:
        return self.describe()


def _as_points(points: np.ndarray, dimension: int) -> np.ndarray:
    return np.asarray(points, dtype=float).reshape(-1, dimension)


def _fmt(values) -> str:
    return " ".join(repr(float(v)) for v in np.atleast_1d(values))


class ProductBump(ScalarField):
    """A·Π_k h((x_k - c_k)/r_k) supported on the box center ± radius."""

    def __init__(self, center: Sequence[float], radius, amplitude: float = 1.0):
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.radius = np.broadcast_to(
            np.asarray(radius, dtype=float), self.center.shape
        ).copy()
        if np.any(self.radius <= 0):
            raise ValueError("bump radius must be positive")
        self.amplitude = float(amplitude)
        self.dimension = self.center.size
        self.order = BUMP_MAX_ORDER
        self.support = Window.around(self.center, self.radius)

    def _axis_table(self, points: np.ndarray, max_order: int) -> np.ndarray:
        """T[o, m, k] = h^(o)(u_k) / r_k^o."""
        pts = _as_points(points, self.dimension)
        u = (pts - self.center) / self.radius
        return np.stack(
            [bump_profile(u, o) / self.radius**o for o in range(max_order + 1)], axis=0
        )

    def _partial(self, table: np.ndarray, counts: Sequence[int]) -> np.ndarray:
        out = np.full(table.shape[1], self.amplitude)
        for axis, order in enumerate(counts):
            out = out * table[order, :, axis]
        return out

    def _counts(self, *axes: int) -> list[int]:
        counts = [0] * self.dimension
        for axis in axes:
            counts[axis] += 1
        return counts

    def value(self, points):
        table = self._axis_table(points, 0)
        return self._partial(table, [0] * self.dimension)

    def gradient(self, points):
        table = self._axis_table(points, 1)
        d = self.dimension
        return np.stack([self._partial(table, self._counts(j)) for j in range(d)], axis=1)

    def hessian(self, points):
        table = self._axis_table(points, 2)
        d = self.dimension
        out = np.empty((table.shape[1], d, d))
        for j in range(d):
            for k in range(j, d):
                out[:, j, k] = out[:, k, j] = self._partial(table, self._counts(j, k))
        return out

    def third(self, points):
        table = self._axis_table(points, 3)
        d = self.dimension
        out = np.empty((table.shape[1], d, d, d))
        for i in range(d):
            for j in range(d):
                for k in range(d):
                    out[:, i, j, k] = self._partial(table, self._counts(i, j, k))
        return out

    def describe(self) -> str:
        return f"(bump ({_fmt(self.center)}) ({_fmt(self.radius)}) {self.amplitude!r})"


class ZeroField(ScalarField):
    """The identically zero function."""

    def __init__(self, dimension: int):
        self.dimension = dimension
        self.order = BUMP_MAX_ORDER
        self.support = None

    def value(self, points):
        return np.zeros(_as_points(points, self.dimension).shape[0])

    def gradient(self, points):
        return np.zeros(_as_points(points, self.dimension).shape)

    def hessian(self, points):
        m = _as_points(points, self.dimension).shape[0]
        return np.zeros((m, self.dimension, self.dimension))

    def third(self, points):
        m = _as_points(points, self.dimension).shape[0]
        return np.zeros((m, self.dimension, self.dimension, self.dimension))

    def describe(self) -> str:
        return "(zero)"


class FieldSum(ScalarField):
    """Σ_j c_j f_j."""

    def __init__(self, terms: Sequence[tuple[float, ScalarField]]):
        if not terms:
            raise ValueError("FieldSum needs at least one term; use ZeroField")
        self.terms = [(float(c), f) for c, f in terms]
        self.dimension = self.terms[0][1].dimension
        self.order = min(f.order for _, f in self.terms)
        supports = [f.support for _, f in self.terms if f.support is not None]
        self.support = None
        for s in supports:
            self.support = s if self.support is None else self.support.hull(s)

    def _combine(self, method: str, points):
        parts = [c * getattr(f, method)(points) for c, f in self.terms]
        return np.sum(parts, axis=0)

    def value(self, points):
        return self._combine("value", points)

    def gradient(self, points):
        return self._combine("gradient", points)

    def hessian(self, points):
        return self._combine("hessian", points)

    def third(self, points):
        return self._combine("third", points)

    def describe(self) -> str:
        inner = " ".join(f"({c!r} {f.describe()})" for c, f in self.terms)
        return f"(sum {inner})"


class DirectionalField(ScalarField):
    """x ↦ ⟨∇ψ(x), v(x)⟩, the derivative of ψ along a vector field."""

    def __init__(self, psi: ScalarField, field):
        psi.require(1)
        self.psi = psi
        self.field = field
        self.dimension = psi.dimension
        self.order = min(psi.order - 1, field.order)
        if psi.support is None or field.support is None:
            self.support = None
        else:
            self.support = psi.support.intersection(field.support)

    def value(self, points):
        return np.einsum("mi,mi->m", self.psi.gradient(points), self.field.value(points))

    def gradient(self, points):
        self.require(1)
        hess = self.psi.hessian(points)
        grad = self.psi.gradient(points)
        v = self.field.value(points)
        jac = self.field.jacobian(points)
        return np.einsum("mij,mi->mj", hess, v) + np.einsum("mij,mi->mj", jac, grad)

    def hessian(self, points):
        self.require(2)
        t3 = self.psi.third(points)
        hess = self.psi.hessian(points)
        grad = self.psi.gradient(points)
        v = self.field.value(points)
        jac = self.field.jacobian(points)
        sec = self.field.second(points)
        out = np.einsum("mijk,mi->mjk", t3, v)
        cross = np.einsum("mij,mik->mjk", hess, jac)
        out = out + cross + np.transpose(cross, (0, 2, 1))
        return out + np.einsum("mijk,mi->mjk", sec, grad)

    def describe(self) -> str:
        return f"(along {self.psi.describe()} {self.field.describe()})"


class GradientInnerField(ScalarField):
    """x ↦ ⟨∇φ(x), ∇ψ(x)⟩."""

    def __init__(self, phi: ScalarField, psi: ScalarField):
        phi.require(1)
        psi.require(1)
        self.phi = phi
        self.psi = psi
        self.dimension = phi.dimension
        self.order = min(phi.order, psi.order) - 1
        if phi.support is None or psi.support is None:
            self.support = None
        else:
            self.support = phi.support.intersection(psi.support)

    def value(self, points):
        return np.einsum("mi,mi->m", self.phi.gradient(points), self.psi.gradient(points))

    def gradient(self, points):
        self.require(1)
        return np.einsum("mij,mi->mj", self.phi.hessian(points), self.psi.gradient(points)) + (
            np.einsum("mij,mi->mj", self.psi.hessian(points), self.phi.gradient(points))
        )

    def describe(self) -> str:
        return f"(grad-inner {self.phi.describe()} {self.psi.describe()})"
