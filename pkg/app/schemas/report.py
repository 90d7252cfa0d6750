"""
Verification report schemas.

An MCReport is one row of the verification suite. Monte Carlo rows pass when
|z| < z_max; deterministic rows (exact algebra, quadrature identities,
finite-difference agreement) pass when the residual is within tolerance.
"""

import math
from datetime import UTC, datetime
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field

from app.utils.numerics import expected_false_failures, z_score

LARGEST_Z = 1e300


def _deterministic_z(residual: float, tolerance: float) -> float:
    """
    Residual in units of the tolerance, finite so it survives JSON.

    An exact identity (tolerance 0) reports the raw residual; an infinite or
    NaN residual reports LARGEST_Z.
    """
    if not math.isfinite(residual):
        return LARGEST_Z
    if tolerance > 0:
        return max(-LARGEST_Z, min(residual / tolerance, LARGEST_Z))
    return residual


class MCReport(BaseModel):
    """One verified identity."""

    model_config = ConfigDict(populate_by_name=True, ser_json_inf_nan="null")

    name: str = Field(..., description="Check name, e.g. 'ibp[F0,F1,v0]'")
    anchor: str = Field(..., description="Slug of the identity being tested")
    kind: Literal["monte_carlo", "deterministic"] = "monte_carlo"
    estimate: float
    stderr: float = Field(..., ge=0.0)
    target: float
    z: float
    passed: bool = Field(..., alias="pass")
    n_samples: int = Field(..., ge=0)
    seed: int
    tolerance: float | None = None
    extras: dict[str, Any] = Field(default_factory=dict)

    @classmethod
    def monte_carlo(
        cls,
        name: str,
        anchor: str,
        estimate: float,
        stderr: float,
        target: float,
        n_samples: int,
        seed: int,
        z_max: float,
        **extras: Any,
    ) -> "MCReport":
        z = z_score(estimate, stderr, target)
        return cls(
            name=name,
            anchor=anchor,
            estimate=estimate,
            stderr=stderr,
            target=target,
            z=z,
            passed=bool(abs(z) < z_max),
            n_samples=n_samples,
            seed=seed,
            extras=extras,
        )

    @classmethod
    def two_sample(
        cls,
        name: str,
        anchor: str,
        estimate: float,
        estimate_se: float,
        reference: float,
        reference_se: float,
        n_samples: int,
        seed: int,
        z_max: float,
        **extras: Any,
    ) -> "MCReport":
        """Compare two independent estimates; ``target`` holds the reference mean."""
        se = math.hypot(estimate_se, reference_se)
        return cls.monte_carlo(
            name, anchor, estimate, se, reference, n_samples, seed, z_max,
            reference_stderr=reference_se, **extras,
        )

    @classmethod
    def deterministic(
        cls,
        name: str,
        anchor: str,
        residual: float,
        tolerance: float,
        n_samples: int,
        seed: int,
        **extras: Any,
    ) -> "MCReport":
        """Residual of an exact identity; z is the residual in units of the tolerance."""
        return cls(
            name=name,
            anchor=anchor,
            kind="deterministic",
            estimate=residual,
            stderr=0.0,
            target=0.0,
            z=_deterministic_z(residual, tolerance),
            passed=bool(math.isfinite(residual) and abs(residual) <= tolerance),
            n_samples=n_samples,
            seed=seed,
            tolerance=tolerance,
            extras=extras,
        )


class SuiteReport(BaseModel):
    """report.json: results plus a metadata block that holds every timestamp."""

    success: bool
    reports: list[MCReport]
    metadata: dict[str, Any] = Field(default_factory=dict)

    @classmethod
    def from_reports(
        cls, reports: list[MCReport], z_max: float | None = None, **metadata: Any
    ) -> "SuiteReport":
        """
        Wrap rows with a creation timestamp.

        With ``z_max`` the metadata also records how many Monte Carlo rows ran
        and how many of them are expected to fail by chance when every
        identity holds.
        """
        if z_max is not None:
            rows = sum(r.kind == "monte_carlo" for r in reports)
            metadata["monte_carlo_rows"] = rows
            metadata["expected_false_failures"] = expected_false_failures(rows, z_max)
        return cls(
            success=all(r.passed for r in reports),
            reports=reports,
            metadata={"created_at": datetime.now(UTC).isoformat(), **metadata},
        )

    def comparable(self) -> dict[str, Any]:
        """The report without its metadata, for reproducibility comparisons."""
        return self.model_dump(mode="json", by_alias=True, exclude={"metadata"})
