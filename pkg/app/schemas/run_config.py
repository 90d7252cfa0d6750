"""
Run-config schemas and the sectioned text format.

A run config is INI-style text with one ``key = value`` per line. Lists are
whitespace separated, ``#`` starts a comment, and named fixtures live in
``[bump.NAME]``, ``[field.NAME]`` and ``[function.NAME]`` sections:

    [space]
    dimension = 1
    lower = -1
    upper = 1
    density = gaussian

    [tau]
    law = mixture
    atoms = 1 2
    weights = 0.5 0.5

    [bump.b0]
    center = 0
    radius = 0.5

    [function.F0]
    outer = identity
    directions = b0

Every problem found while parsing, validating or resolving names is
reported together with the line it comes from.
"""

from __future__ import annotations

from typing import Annotated, Any, Literal

from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

from app.core.errors import RunConfigError


def _split_words(value: Any) -> Any:
    if isinstance(value, str):
        return tuple(value.split())
    return value


def _parse_bool(value: Any) -> Any:
    if isinstance(value, str):
        lowered = value.strip().lower()
        if lowered in ("true", "yes", "on", "1"):
            return True
        if lowered in ("false", "no", "off", "0"):
            return False
    return value


FloatList = Annotated[tuple[float, ...], BeforeValidator(_split_words)]
NameList = Annotated[tuple[str, ...], BeforeValidator(_split_words)]
Flag = Annotated[bool, BeforeValidator(_parse_bool)]

DensityFamily = Literal["constant", "gaussian", "quadratic"]
LawFamily = Literal["point-mass", "mixture", "gamma", "uniform"]
MarkFamily = Literal["uniform-box", "discrete"]
OuterFamily = Literal["identity", "tanh", "exp", "sin", "poly", "product"]
Command = Literal["sample", "verify", "simulate", "adjudicate"]
Measure = Literal["simple", "compound", "marked"]

CHECK_NAMES = (
    "laplace",
    "moments",
    "covariance",
    "ibp",
    "divergence",
    "symmetry",
    "quasi_invariance",
    "reduction",
    "count_law",
    "consistency",
    "commutation",
    "directional",
    "underlying_form",
    "stationarity",
    "generator",
)


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SpaceSection(Section):
    dimension: int = Field(..., ge=1, le=3)
    lower: FloatList
    upper: FloatList
    density: DensityFamily = "constant"
    level: float = Field(1.0, gt=0)
    amplitude: float = Field(1.0, gt=0)
    center: FloatList = (0.0,)
    width: float = Field(1.0, gt=0)
    offset: float = Field(1.0, gt=0)
    curvature: FloatList = (1.0,)
    envelope: float | None = Field(None, gt=0)

    @model_validator(mode="after")
    def check_shapes(self) -> SpaceSection:
        if len(self.lower) != self.dimension or len(self.upper) != self.dimension:
            raise ValueError("lower and upper need one entry per dimension")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper, strict=True)):
            raise ValueError("lower must be below upper on every axis")
        for name in ("center", "curvature"):
            if len(getattr(self, name)) not in (1, self.dimension):
                raise ValueError(f"{name} needs 1 or {self.dimension} entries")
        return self


class TauSection(Section):
    law: LawFamily = "point-mass"
    location: float = Field(1.0, gt=0)
    mass: float = Field(1.0, gt=0)
    atoms: FloatList = ()
    weights: FloatList = ()
    shape: float = Field(1.0, gt=0)
    scale: float = Field(1.0, gt=0)
    low: float = Field(0.0, ge=0)
    high: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def check_family(self) -> TauSection:
        if self.law == "mixture":
            if not self.atoms or len(self.atoms) != len(self.weights):
                raise ValueError("mixture needs atoms and weights of equal length")
            if min(self.atoms) <= 0 or min(self.weights) <= 0:
                raise ValueError("mixture atoms and weights must be positive")
        if self.law == "uniform" and self.low >= self.high:
            raise ValueError("uniform law needs low < high")
        return self


class MarksSection(Section):
    law: MarkFamily = "uniform-box"
    lower: FloatList = (0.0,)
    upper: FloatList = (1.0,)
    atoms: FloatList = ()
    probabilities: FloatList = ()
    weights: FloatList = (1.0,)
    offset: float = 0.0
    direction: str = ""


class BumpSection(Section):
    center: FloatList
    radius: FloatList
    amplitude: float = 1.0

    @field_validator("radius")
    @classmethod
    def positive_radius(cls, v):
        if any(r <= 0 for r in v):
            raise ValueError("radius must be positive")
        return v


class FieldSection(Section):
    bump: str
    direction: FloatList
    slope: FloatList = (0.0,)
    intercept: float = 1.0


class FunctionSection(Section):
    outer: OuterFamily = "identity"
    directions: NameList
    weights: FloatList = ()
    offset: float = 0.0
    coefficients: FloatList = ()
    scale: float = 1.0

    @model_validator(mode="after")
    def check_outer(self) -> FunctionSection:
        if self.weights and len(self.weights) != len(self.directions):
            raise ValueError("weights need one entry per direction")
        if self.outer == "poly" and not self.coefficients:
            raise ValueError("poly outer needs coefficients")
        return self


class JobSection(Section):
    command: Command = "verify"
    check: str = "all"
    measure: Measure = "compound"
    n: int = Field(200_000, ge=1)
    seed: int = Field(42, ge=0, lt=2**64)
    dt: float = Field(1e-3, gt=0, le=0.01)
    T: float = Field(0.25, ge=0)
    dt_list: FloatList = (2e-3, 1e-3)
    replicas: int = Field(100_000, ge=100)
    mode: Literal["mark_weighted", "unit"] = "mark_weighted"
    stride: int = Field(1, ge=1)
    flow_time: float = 0.3
    tolerance: float = Field(1e-6, gt=0)
    z_max: float = Field(3.0, gt=0)
    configurations: int = Field(20, ge=1)
    primary: str = ""
    secondary: str = ""
    probe_points: FloatList = ()
    probe_marks: FloatList = ()

    @field_validator("check")
    @classmethod
    def known_check(cls, v):
        if v != "all" and v not in CHECK_NAMES:
            raise ValueError(f"unknown check {v!r}; choose 'all' or one of {CHECK_NAMES}")
        return v


class OutputSection(Section):
    dir: str = "out"
    csv: Flag = False
    report: str = "report.json"
    data: str = "data.jsonl"
    trajectory: str = "trajectory.jsonl"


class RunConfig(BaseModel):
    """A validated run config; names of fixtures are resolved by parse_config."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    space: SpaceSection
    tau: TauSection = TauSection()
    marks: MarksSection | None = None
    bumps: dict[str, BumpSection] = Field(default_factory=dict)
    vector_fields: dict[str, FieldSection] = Field(default_factory=dict)
    functions: dict[str, FunctionSection] = Field(default_factory=dict)
    job: JobSection = JobSection()
    output: OutputSection = OutputSection()


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------

NAMED_SECTIONS = {"bump": "bumps", "field": "vector_fields", "function": "functions"}
PLAIN_SECTIONS = ("space", "tau", "marks", "job", "output")


def _read_sections(text: str, problems: list) -> tuple[dict, dict]:
    """Raw {section: {key: value}} plus {(path..., key): line} locations."""
    raw: dict[str, Any] = {}
    where: dict[tuple, int] = {}
    path: tuple | None = None

    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            header = stripped[1:-1].strip()
            kind, _, name = header.partition(".")
            if kind in NAMED_SECTIONS and name:
                path = (NAMED_SECTIONS[kind], name)
                group = raw.setdefault(path[0], {})
                if name in group:
                    problems.append((lineno, f"duplicate section [{header}]"))
                group[name] = {}
            elif kind in PLAIN_SECTIONS and not name:
                path = (kind,)
                if kind in raw:
                    problems.append((lineno, f"duplicate section [{header}]"))
                raw[kind] = {}
            else:
                problems.append((lineno, f"unknown section [{header}]"))
                path = None
                continue
            where[path] = lineno
            continue
        if "=" not in stripped:
            problems.append((lineno, f"expected 'key = value', got {stripped!r}"))
            continue
        if path is None:
            problems.append((lineno, "key outside of a section"))
            continue
        key, _, value = stripped.partition("=")
        key = key.strip()
        target = raw[path[0]] if len(path) == 1 else raw[path[0]][path[1]]
        if key in target:
            problems.append((lineno, f"duplicate key {key!r}"))
        target[key] = value.strip()
        where[(*path, key)] = lineno
    return raw, where


def _locate(where: dict[tuple, int], loc: tuple) -> int | None:
    """Longest prefix of a pydantic error location that has a recorded line."""
    loc = tuple(str(part) for part in loc)
    for cut in range(len(loc), 0, -1):
        if loc[:cut] in where:
            return where[loc[:cut]]
    return None


def _resolve_names(config: RunConfig, where: dict[tuple, int]) -> list[tuple[int | None, str]]:
    problems: list[tuple[int | None, str]] = []
    dim = config.space.dimension
    for name, bump in config.bumps.items():
        if len(bump.center) != dim:
            problems.append((where.get(("bumps", name, "center")), f"bump {name!r} needs {dim} center entries"))
    for name, field in config.vector_fields.items():
        if field.bump not in config.bumps:
            problems.append((where.get(("vector_fields", name, "bump")), f"undefined bump {field.bump!r}"))
        if len(field.direction) != dim:
            problems.append((where.get(("vector_fields", name, "direction")), f"field {name!r} needs {dim} direction entries"))
    for name, function in config.functions.items():
        for ref in function.directions:
            if ref not in config.bumps:
                problems.append((where.get(("functions", name, "directions")), f"undefined bump {ref!r}"))
    for key in ("primary", "secondary"):
        ref = getattr(config.job, key)
        if ref and ref not in config.functions:
            problems.append((where.get(("job", key)), f"undefined function {ref!r}"))
    probe = config.job
    if len(probe.probe_points) != dim * len(probe.probe_marks):
        problems.append((where.get(("job", "probe_points")), f"probe_points needs {dim} coordinates per probe mark"))
    if config.marks is not None and config.marks.direction and config.marks.direction not in config.bumps:
        problems.append((where.get(("marks", "direction")), f"undefined bump {config.marks.direction!r}"))
    return problems


def parse_config(text: str) -> RunConfig:
    """
    Parse and validate run-config text.

    Raises:
        RunConfigError: Listing every problem with its line number
    """
    problems: list[tuple[int | None, str]] = []
    raw, where = _read_sections(text, problems)
    if "space" not in raw:
        problems.append((None, "missing [space] section"))
    if problems:
        raise RunConfigError(problems)

    try:
        config = RunConfig.model_validate(raw)
    except ValidationError as exc:
        for err in exc.errors():
            loc = tuple(err["loc"])
            label = ".".join(str(p) for p in loc)
            problems.append((_locate(where, loc), f"{label}: {err['msg']}"))
        raise RunConfigError(problems) from exc

    problems = _resolve_names(config, where)
    if problems:
        raise RunConfigError(problems)
    return config


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return " ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _render_section(header: str, model: BaseModel) -> list[str]:
    lines = [f"[{header}]"]
    for key, value in model.model_dump(exclude_defaults=True).items():
        if value is None or value == ():
            continue
        lines.append(f"{key} = {_format(value)}")
    return lines


def render_config(config: RunConfig) -> str:
    """Text that parse_config turns back into an equal RunConfig."""
    blocks = [_render_section("space", config.space), _render_section("tau", config.tau)]
    if config.marks is not None:
        blocks.append(_render_section("marks", config.marks))
    for kind, attr in NAMED_SECTIONS.items():
        for name, section in getattr(config, attr).items():
            blocks.append(_render_section(f"{kind}.{name}", section))
    blocks.append(_render_section("job", config.job))
    blocks.append(_render_section("output", config.output))
    return "\n\n".join("\n".join(block) for block in blocks) + "\n"
