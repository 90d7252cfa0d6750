"""
Expression trees over configuration pairings.

Cylinder functions g(⟨ω,φ_1⟩, …, ⟨ω,φ_N⟩) are not closed under directional
derivatives or multiplication by logarithmic derivatives, so the calculus
works on a slightly larger class: trees built from marked pairings ⟨ω,ψ⟩,
unmarked pairings ⟨γ_ω,ψ⟩, outer compositions, sums, products and constants.
Differentiating a tree consumes one derivative order of its scalar fields.

Outer functions are sympy expressions; their partial derivatives are
generated symbolically and lambdified to numpy once.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from collections.abc import Sequence
from functools import cached_property

import numpy as np
import sympy as sp

from app.domain.configuration import Ensemble, pair
from app.domain.fields import DirectionalField, ScalarField

RIDGE_PROFILES = ("identity", "tanh", "exp", "sin", "poly")


class OuterFunction:
    """Smooth g: R^N -> R with symbolic partial derivatives."""

    def __init__(self, expr: sp.Expr, symbols: Sequence[sp.Symbol]):
        self.expr = sp.sympify(expr)
        self.symbols = tuple(symbols)
        self._partials: dict[int, OuterFunction] = {}

    @classmethod
    def symbols_for(cls, arity: int) -> tuple[sp.Symbol, ...]:
        return tuple(sp.Symbol(f"y{i + 1}", real=True) for i in range(arity))

    @classmethod
    def ridge(
        cls,
        profile: str,
        weights: Sequence[float],
        offset: float = 0.0,
        coefficients: Sequence[float] = (),
    ) -> OuterFunction:
        """g(y) = h(⟨a, y⟩ + b) for a univariate profile h."""
        symbols = cls.symbols_for(len(weights))
        z = sum(sp.Float(w) * y for w, y in zip(weights, symbols, strict=True)) + sp.Float(offset)
        if profile == "identity":
            expr = z
        elif profile == "tanh":
            expr = sp.tanh(z)
        elif profile == "exp":
            expr = sp.exp(z)
        elif profile == "sin":
            expr = sp.sin(z)
        elif profile == "poly":
            if not coefficients:
                raise ValueError("poly profile needs coefficients")
            expr = sum(sp.Float(c) * z**k for k, c in enumerate(coefficients))
        else:
            raise ValueError(f"unknown outer profile {profile!r}; choose from {RIDGE_PROFILES}")
        return cls(expr, symbols)

    @classmethod
    def product(cls, arity: int, scale: float = 1.0) -> OuterFunction:
        """g(y) = c·Π y_i."""
        symbols = cls.symbols_for(arity)
        return cls(sp.Float(scale) * sp.Mul(*symbols), symbols)

    @property
    def arity(self) -> int:
        return len(self.symbols)

    @cached_property
    def _func(self):
        return sp.lambdify(self.symbols, self.expr, modules="numpy")

    def __call__(self, args: np.ndarray) -> np.ndarray:
        args = np.asarray(args, dtype=float).reshape(-1, self.arity)
        out = self._func(*args.T)
        return np.broadcast_to(np.asarray(out, dtype=float), (args.shape[0],)).copy()

    def partial(self, i: int) -> OuterFunction:
        if i not in self._partials:
            self._partials[i] = OuterFunction(sp.diff(self.expr, self.symbols[i]), self.symbols)
        return self._partials[i]

    def gradient(self, args: np.ndarray) -> np.ndarray:
        return np.stack([self.partial(i)(args) for i in range(self.arity)], axis=1)

    def hessian(self, args: np.ndarray) -> np.ndarray:
        n = np.asarray(args).reshape(-1, self.arity).shape[0]
        out = np.empty((n, self.arity, self.arity))
        for i in range(self.arity):
            for j in range(i, self.arity):
                out[:, i, j] = out[:, j, i] = self.partial(i).partial(j)(args)
        return out

    @property
    def is_zero(self) -> bool:
        return self.expr == 0

    def describe(self) -> str:
        return sp.sstr(self.expr)


# ---------------------------------------------------------------------------
# Expression nodes
# ---------------------------------------------------------------------------


class Expression(ABC):
    """A functional of the configuration, evaluated batch-wise."""

    @abstractmethod
    def evaluate(self, batch: Ensemble) -> np.ndarray: ...

    @abstractmethod
    def derivative(self, field) -> Expression:
        """Directional derivative along the lifted vector field."""

    @abstractmethod
    def render(self) -> str: ...

    def __repr__(self) -> str:
        return self.render()


class Constant(Expression):
    def __init__(self, value: float):
        self.value = float(value)

    def evaluate(self, batch):
        return np.full(batch.size, self.value)

    def derivative(self, field):
        return Constant(0.0)

    def render(self):
        return repr(self.value)


ZERO = Constant(0.0)


def _is_zero(expr: Expression) -> bool:
    return isinstance(expr, Constant) and expr.value == 0.0


class MarkedPair(Expression):
    """⟨ω, ψ⟩."""

    def __init__(self, field: ScalarField):
        self.field = field

    def evaluate(self, batch):
        return pair(batch, self.field, "marked")

    def derivative(self, field):
        return MarkedPair(DirectionalField(self.field, field))

    def render(self):
        return f"(marked {self.field.describe()})"


class UnmarkedPair(Expression):
    """⟨γ_ω, ψ⟩."""

    def __init__(self, field: ScalarField):
        self.field = field

    def evaluate(self, batch):
        return pair(batch, self.field, "unmarked")

    def derivative(self, field):
        return UnmarkedPair(DirectionalField(self.field, field))

    def render(self):
        return f"(unmarked {self.field.describe()})"


class Outer(Expression):
    """g(child_1, …, child_N)."""

    def __init__(self, function: OuterFunction, children: Sequence[Expression]):
        if function.arity != len(children):
            raise ValueError("outer function arity must match the number of children")
        self.function = function
        self.children = tuple(children)

    def _arguments(self, batch):
        return np.stack([c.evaluate(batch) for c in self.children], axis=1)

    def evaluate(self, batch):
        return self.function(self._arguments(batch))

    def derivative(self, field):
        terms = []
        for i, child in enumerate(self.children):
            inner = child.derivative(field)
            partial = self.function.partial(i)
            if _is_zero(inner) or partial.is_zero:
                continue
            terms.append(make_product([Outer(partial, self.children), inner]))
        return make_sum(terms)

    def render(self):
        kids = " ".join(c.render() for c in self.children)
        return f"(outer [{self.function.describe()}] {kids})"


class Sum(Expression):
    def __init__(self, terms: Sequence[Expression]):
        self.terms = tuple(terms)

    def evaluate(self, batch):
        out = np.zeros(batch.size)
        for term in self.terms:
            out = out + term.evaluate(batch)
        return out

    def derivative(self, field):
        return make_sum([t.derivative(field) for t in self.terms])

    def render(self):
        return "(+ " + " ".join(t.render() for t in self.terms) + ")"


class Product(Expression):
    def __init__(self, factors: Sequence[Expression]):
        self.factors = tuple(factors)

    def evaluate(self, batch):
        out = np.ones(batch.size)
        for factor in self.factors:
            out = out * factor.evaluate(batch)
        return out

    def derivative(self, field):
        terms = []
        for i, factor in enumerate(self.factors):
            inner = factor.derivative(field)
            if _is_zero(inner):
                continue
            terms.append(make_product([*self.factors[:i], inner, *self.factors[i + 1 :]]))
        return make_sum(terms)

    def render(self):
        return "(* " + " ".join(f.render() for f in self.factors) + ")"


def make_sum(terms: Sequence[Expression]) -> Expression:
    kept = [t for t in terms if not _is_zero(t)]
    if not kept:
        return ZERO
    if len(kept) == 1:
        return kept[0]
    return Sum(kept)


def make_product(factors: Sequence[Expression]) -> Expression:
    if any(_is_zero(f) for f in factors):
        return ZERO
    kept = [f for f in factors if not (isinstance(f, Constant) and f.value == 1.0)]
    if not kept:
        return Constant(1.0)
    if len(kept) == 1:
        return kept[0]
    return Product(kept)
