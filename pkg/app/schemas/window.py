"""
Box window schema.

A window is an open box Λ = Π_k (lower_k, upper_k) in R^d. It is the only
domain shape used by the library: the underlying space, supports of test
functions and vector fields, and restriction regions are all windows.
"""

from __future__ import annotations

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class Window(BaseModel):
    """Open axis-aligned box."""

    model_config = ConfigDict(frozen=True)

    lower: tuple[float, ...] = Field(..., min_length=1, description="Lower corner")
    upper: tuple[float, ...] = Field(..., min_length=1, description="Upper corner")

    @model_validator(mode="after")
    def validate_corners(self) -> Window:
        if len(self.lower) != len(self.upper):
            raise ValueError("lower and upper must have the same dimension")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper, strict=True)):
            raise ValueError("window requires lower_k < upper_k on every axis")
        return self

    @classmethod
    def from_bounds(cls, lower, upper) -> Window:
        """Build from scalars or sequences."""
        lo = np.atleast_1d(np.asarray(lower, dtype=float))
        hi = np.atleast_1d(np.asarray(upper, dtype=float))
        return cls(lower=tuple(float(v) for v in lo), upper=tuple(float(v) for v in hi))

    @classmethod
    def around(cls, center, radius) -> Window:
        """Box of half-width ``radius`` around ``center``."""
        c = np.atleast_1d(np.asarray(center, dtype=float))
        r = np.broadcast_to(np.asarray(radius, dtype=float), c.shape)
        return cls.from_bounds(c - r, c + r)

    @property
    def dimension(self) -> int:
        return len(self.lower)

    @property
    def lower_array(self) -> np.ndarray:
        return np.asarray(self.lower, dtype=float)

    @property
    def upper_array(self) -> np.ndarray:
        return np.asarray(self.upper, dtype=float)

    @property
    def widths(self) -> np.ndarray:
        return self.upper_array - self.lower_array

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    @property
    def ranges(self) -> list[tuple[float, float]]:
        """Per-axis integration ranges."""
        return list(zip(self.lower, self.upper, strict=True))

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean mask of points strictly inside the box; ``points`` is (m, d)."""
        pts = np.asarray(points, dtype=float).reshape(-1, self.dimension)
        return np.all((pts > self.lower_array) & (pts < self.upper_array), axis=1)

    def contains_window(self, other: Window) -> bool:
        """True when ``other`` lies inside this box (closure inclusion)."""
        return bool(
            np.all(other.lower_array >= self.lower_array)
            and np.all(other.upper_array <= self.upper_array)
        )

    def strictly_contains_window(self, other: Window) -> bool:
        """True when the closure of ``other`` lies in the open box."""
        return bool(
            np.all(other.lower_array > self.lower_array)
            and np.all(other.upper_array < self.upper_array)
        )

    def intersection(self, other: Window) -> Window | None:
        """Overlap of two boxes, or None when they do not meet."""
        lo = np.maximum(self.lower_array, other.lower_array)
        hi = np.minimum(self.upper_array, other.upper_array)
        if np.any(lo >= hi):
            return None
        return Window.from_bounds(lo, hi)

    def hull(self, other: Window) -> Window:
        """Smallest box containing both."""
        return Window.from_bounds(
            np.minimum(self.lower_array, other.lower_array),
            np.maximum(self.upper_array, other.upper_array),
        )

    def split(self, axis: int = 0, at: float | None = None) -> tuple[Window, Window]:
        """Partition into two boxes along ``axis`` (midpoint by default)."""
        cut = 0.5 * (self.lower[axis] + self.upper[axis]) if at is None else float(at)
        if not self.lower[axis] < cut < self.upper[axis]:
            raise ValueError("cut must lie strictly inside the window")
        left_upper = list(self.upper)
        left_upper[axis] = cut
        right_lower = list(self.lower)
        right_lower[axis] = cut
        return (
            Window(lower=self.lower, upper=tuple(left_upper)),
            Window(lower=tuple(right_lower), upper=self.upper),
        )
