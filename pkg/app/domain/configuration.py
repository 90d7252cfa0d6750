"""
Configuration data model.

Simple configurations (finite point sets), compound/marked configurations
ω = Σ s_x ε_x (a point set with a mark attached to each point), batched
ensembles of configurations, and the set-level operations: pairing, the Σ
isomorphism, push-forward along a flow, restriction and counting.

Atoms are stored sorted lexicographically by coordinates, so equality of
configurations is bitwise equality of the sorted atom arrays.
"""

from __future__ import annotations

import csv
import io
import json
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np

from app.core.errors import InvalidConfigurationError
from app.domain.fields import ScalarField
from app.schemas.window import Window

Weighting = Literal["marked", "unmarked"]


def _lexsort(points: np.ndarray) -> np.ndarray:
    if points.shape[0] == 0:
        return np.arange(0)
    # np.lexsort sorts by the last key first
    return np.lexsort(points.T[::-1])


def _reject_duplicates(points: np.ndarray, what: str) -> None:
    if points.shape[0] > 1:
        diffs = np.any(points[1:] != points[:-1], axis=1)
        if not np.all(diffs):
            raise InvalidConfigurationError(
                f"{what} contains coinciding points",
                data={"point": points[1:][~diffs][0].tolist()},
            )


class SimpleConfiguration:
    """Finite set of distinct points in R^d."""

    __slots__ = ("points", "dimension")

    def __init__(self, points, dimension: int | None = None):
        pts = np.asarray(points, dtype=float)
        if dimension is None:
            if pts.ndim != 2:
                raise ValueError("dimension is required for an empty configuration")
            dimension = pts.shape[1]
        pts = pts.reshape(-1, dimension)
        pts = pts[_lexsort(pts)]
        _reject_duplicates(pts, "simple configuration")
        pts.setflags(write=False)
        self.points = pts
        self.dimension = dimension

    def __len__(self) -> int:
        return self.points.shape[0]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SimpleConfiguration)
            and self.dimension == other.dimension
            and np.array_equal(self.points, other.points)
        )

    def __hash__(self):
        return hash((self.dimension, self.points.tobytes()))

    def __repr__(self) -> str:
        return f"SimpleConfiguration({self.points.tolist()})"


class MarkedConfiguration:
    """
    Finite set of (point, mark) atoms.

    ``marks`` is (n,) with strictly positive entries for compound
    configurations, or (n, q) for configurations marked in R^q.
    """

    __slots__ = ("points", "marks", "dimension")

    def __init__(self, points, marks, dimension: int | None = None):
        pts = np.asarray(points, dtype=float)
        if dimension is None:
            if pts.ndim != 2:
                raise ValueError("dimension is required for an empty configuration")
            dimension = pts.shape[1]
        pts = pts.reshape(-1, dimension)
        mk = np.asarray(marks, dtype=float)
        if mk.ndim == 0 or mk.shape[0] != pts.shape[0]:
            raise InvalidConfigurationError("one mark per point is required")
        order = _lexsort(pts)
        pts = pts[order]
        mk = mk[order]
        _reject_duplicates(pts, "marked configuration")
        if mk.ndim == 1 and np.any(mk <= 0):
            raise InvalidConfigurationError(
                "compound marks must be strictly positive", data={"marks": mk.tolist()}
            )
        pts.setflags(write=False)
        mk.setflags(write=False)
        self.points = pts
        self.marks = mk
        self.dimension = dimension

    @classmethod
    def empty(cls, dimension: int, mark_dimension: int | None = None) -> MarkedConfiguration:
        marks = np.zeros(0) if mark_dimension is None else np.zeros((0, mark_dimension))
        return cls(np.zeros((0, dimension)), marks, dimension)

    @property
    def is_compound(self) -> bool:
        return self.marks.ndim == 1

    @property
    def gamma(self) -> SimpleConfiguration:
        """γ_ω, the underlying point set."""
        return SimpleConfiguration(self.points, self.dimension)

    def __len__(self) -> int:
        return self.points.shape[0]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, MarkedConfiguration)
            and self.dimension == other.dimension
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.marks, other.marks)
        )

    def __hash__(self):
        return hash((self.dimension, self.points.tobytes(), self.marks.tobytes()))

    def __repr__(self) -> str:
        return f"MarkedConfiguration({self.atoms()})"

    def atoms(self) -> list[list[float]]:
        """Rows [x_1..x_d, mark...]."""
        marks = self.marks.reshape(len(self), -1)
        return np.hstack([self.points, marks]).tolist()

    def as_ensemble(self) -> Ensemble:
        return Ensemble(self.points, self.marks, np.zeros(len(self), dtype=np.int64), 1)

    def check_inside(self, window: Window) -> None:
        if len(self) and not np.all(window.contains(self.points)):
            raise InvalidConfigurationError("configuration has points outside the window")

    # Serialization ---------------------------------------------------------

    def to_json_line(self) -> str:
        record: dict = {"atoms": self.atoms()}
        if not self.is_compound:
            record["q"] = self.marks.shape[1]
        return json.dumps(record, separators=(",", ":"))

    @classmethod
    def from_json_line(cls, line: str, dimension: int) -> MarkedConfiguration:
        record = json.loads(line)
        q = record.get("q")
        width = dimension + (q or 1)
        rows = np.asarray(record["atoms"], dtype=float).reshape(-1, width)
        marks = rows[:, dimension] if q is None else rows[:, dimension:]
        return cls(rows[:, :dimension], marks, dimension)

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        q = 1 if self.is_compound else self.marks.shape[1]
        mark_cols = ["mark"] if q == 1 else [f"mark_{j + 1}" for j in range(q)]
        writer.writerow([f"x_{k + 1}" for k in range(self.dimension)] + mark_cols)
        for row in self.atoms():
            writer.writerow([repr(v) for v in row])
        return buffer.getvalue()


@dataclass(frozen=True)
class Ensemble:
    """
    A batch of n marked configurations stored as flat arrays.

    ``owner[j]`` is the index of the configuration that atom j belongs to;
    owners are non-decreasing.
    """

    points: np.ndarray
    marks: np.ndarray
    owner: np.ndarray
    size: int

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @property
    def n_atoms(self) -> int:
        return self.points.shape[0]

    @classmethod
    def from_configurations(cls, configurations: Sequence[MarkedConfiguration]) -> Ensemble:
        if not configurations:
            raise ValueError("an ensemble needs at least one configuration")
        d = configurations[0].dimension
        points = np.concatenate([c.points for c in configurations]).reshape(-1, d)
        marks = np.concatenate([c.marks for c in configurations])
        owner = np.repeat(np.arange(len(configurations)), [len(c) for c in configurations])
        return cls(points, marks, owner.astype(np.int64), len(configurations))

    @classmethod
    def replicate(cls, configuration: MarkedConfiguration, n: int) -> Ensemble:
        k = len(configuration)
        points = np.tile(configuration.points, (n, 1))
        reps = (n,) + (1,) * (configuration.marks.ndim - 1)
        marks = np.tile(configuration.marks, reps)
        owner = np.repeat(np.arange(n, dtype=np.int64), k)
        return cls(points, marks, owner, n)

    @classmethod
    def concatenate(cls, parts: Iterable[Ensemble]) -> Ensemble:
        parts = list(parts)
        offsets = np.cumsum([0] + [p.size for p in parts[:-1]])
        return cls(
            np.concatenate([p.points for p in parts]),
            np.concatenate([p.marks for p in parts]),
            np.concatenate([p.owner + off for p, off in zip(parts, offsets, strict=True)]),
            int(sum(p.size for p in parts)),
        )

    def counts(self) -> np.ndarray:
        return np.bincount(self.owner, minlength=self.size)

    def per_configuration_sum(self, values: np.ndarray) -> np.ndarray:
        """Σ over atoms of each configuration; values is (M,)."""
        return np.bincount(self.owner, weights=values, minlength=self.size).astype(float)

    def with_points(self, points: np.ndarray) -> Ensemble:
        return Ensemble(points, self.marks, self.owner, self.size)

    def select(self, mask: np.ndarray) -> Ensemble:
        return Ensemble(self.points[mask], self.marks[mask], self.owner[mask], self.size)

    def configuration(self, index: int) -> MarkedConfiguration:
        lo, hi = np.searchsorted(self.owner, [index, index + 1])
        return MarkedConfiguration(self.points[lo:hi], self.marks[lo:hi], self.dimension)

    def configurations(self) -> Iterator[MarkedConfiguration]:
        bounds = np.searchsorted(self.owner, np.arange(self.size + 1))
        for lo, hi in zip(bounds[:-1], bounds[1:], strict=True):
            yield MarkedConfiguration(self.points[lo:hi], self.marks[lo:hi], self.dimension)


class MarkedTestFunction:
    """f(x, m) = φ(x)·(⟨a, m⟩ + b) on X × R^q."""

    def __init__(self, field: ScalarField, weights: Sequence[float], offset: float = 0.0):
        self.field = field
        self.weights = np.atleast_1d(np.asarray(weights, dtype=float))
        self.offset = float(offset)

    def value(self, points: np.ndarray, marks: np.ndarray) -> np.ndarray:
        marks = np.asarray(marks, dtype=float).reshape(points.shape[0], -1)
        return self.field.value(points) * (marks @ self.weights + self.offset)

    def describe(self) -> str:
        return f"(marked {self.field.describe()} {self.weights.tolist()} {self.offset!r})"


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def pair(omega, f: ScalarField, weighting: Weighting = "marked"):
    """
    ⟨ω, f⟩ = Σ s_x f(x) (marked) or ⟨γ_ω, f⟩ = Σ f(x) (unmarked).

    Accepts a MarkedConfiguration (returns a float) or an Ensemble (returns
    one value per configuration).
    """
    batch = omega.as_ensemble() if isinstance(omega, MarkedConfiguration) else omega
    if batch.n_atoms == 0:
        out = np.zeros(batch.size)
    else:
        values = f.value(batch.points)
        if weighting == "marked":
            if batch.marks.ndim != 1:
                raise InvalidConfigurationError("marked pairing needs scalar marks")
            values = values * batch.marks
        elif weighting != "unmarked":
            raise ValueError(f"unknown weighting: {weighting}")
        out = batch.per_configuration_sum(values)
    return float(out[0]) if isinstance(omega, MarkedConfiguration) else out


def pair_marked_function(omega, f: MarkedTestFunction):
    """⟨ω, f⟩ = Σ_x f(x, m_x) for configurations marked in R^q."""
    batch = omega.as_ensemble() if isinstance(omega, MarkedConfiguration) else omega
    if batch.n_atoms == 0:
        out = np.zeros(batch.size)
    else:
        out = batch.per_configuration_sum(f.value(batch.points, batch.marks))
    return float(out[0]) if isinstance(omega, MarkedConfiguration) else out


def sigma_map(gamma_hat: SimpleConfiguration) -> MarkedConfiguration:
    """
    Σ: configurations on X × R₊ -> compound configurations.

    The last coordinate of each point is its mark. Coinciding X-parts occur
    with probability zero under the product intensity; they are rejected.
    """
    d = gamma_hat.dimension - 1
    if d < 1:
        raise InvalidConfigurationError("sigma_map needs points in X × R₊")
    points = gamma_hat.points[:, :d]
    marks = gamma_hat.points[:, d]
    return MarkedConfiguration(points, marks, d)


def sigma_map_inverse(omega: MarkedConfiguration) -> SimpleConfiguration:
    """Σ⁻¹: compound configuration -> configuration on X × R₊."""
    if not omega.is_compound:
        raise InvalidConfigurationError("sigma_map_inverse needs scalar marks")
    return SimpleConfiguration(
        np.hstack([omega.points, omega.marks[:, None]]), omega.dimension + 1
    )


def pushforward(omega, v, t: float, max_step: float | None = None):
    """φ*ω = Σ s_x ε_{φ(x)} for φ the time-t flow of v; marks unchanged."""
    from app.domain.space import flow

    if isinstance(omega, Ensemble):
        if omega.n_atoms == 0:
            return omega
        return omega.with_points(flow(v, t, omega.points, max_step=max_step).endpoint)
    if len(omega) == 0:
        return omega
    moved = flow(v, t, omega.points, max_step=max_step).endpoint
    return MarkedConfiguration(moved, omega.marks, omega.dimension)


def restrict(omega, window: Window):
    """p_Λ ω: keep the atoms inside the window, marks retained."""
    if isinstance(omega, Ensemble):
        return omega.select(window.contains(omega.points))
    mask = window.contains(omega.points) if len(omega) else np.zeros(0, dtype=bool)
    return MarkedConfiguration(omega.points[mask], omega.marks[mask], omega.dimension)


def count(omega, window: Window):
    """N_Λ(ω), the number of atoms inside the window."""
    if isinstance(omega, Ensemble):
        return omega.per_configuration_sum(window.contains(omega.points).astype(float)).astype(
            np.int64
        )
    if len(omega) == 0:
        return 0
    return int(np.count_nonzero(window.contains(omega.points)))


def as_ensemble(omega) -> tuple[Ensemble, bool]:
    """Return (batch, single) for a configuration or an ensemble."""
    if isinstance(omega, MarkedConfiguration):
        return omega.as_ensemble(), True
    return omega, False


def unbatch(values: np.ndarray, single: bool):
    return float(values[0]) if single else values
