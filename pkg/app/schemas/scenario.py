"""
Pydantic schemas for scenario files.

A scenario is one YAML mapping: the spin, an optional field family, the time
grid, the stepper and the outputs to produce. Validation errors are reported
with the dotted key and, when it can be found, the YAML line.
"""

import math
from pathlib import Path
from typing import Annotated, Any, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from app.core.config import settings
from app.core.exceptions import ScenarioConfigError
from app.physics.algebra import parse_spin
from app.physics.grid import Stepper


class StrictModel(BaseModel):
    """Base schema rejecting unknown keys."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)


# Direction paths


class PrecessionPathSpec(StrictModel):
    """n(t) on the cone of half-angle theta, turning at rate omega."""

    kind: Literal["precession"]
    theta: float = Field(ge=0.0, le=math.pi)
    omega: float


class SpiralPathSpec(StrictModel):
    """Constant-speed spiral |n'| = c1 rising at rate lambda."""

    kind: Literal["spiral"]
    lam: float = Field(alias="lambda", gt=0.0)
    c1: float = Field(gt=0.0)
    sign: Literal[1, -1] = 1

    @model_validator(mode="after")
    def check_speed(self) -> "SpiralPathSpec":
        if self.c1 <= self.lam:
            raise ValueError(f"c1 must exceed lambda, got c1={self.c1}, lambda={self.lam}")
        return self

    @property
    def domain_end(self) -> float:
        return math.pi / (2.0 * self.lam)


class TabulatedPathSpec(StrictModel):
    """Samples t, nx, ny, nz read from a CSV file."""

    kind: Literal["tabulated"]
    csv: str


PathSpec = Annotated[
    Union[PrecessionPathSpec, SpiralPathSpec, TabulatedPathSpec], Field(discriminator="kind")
]


# Magnitude laws


class ConstantLawSpec(StrictModel):
    law: Literal["constant"]
    value: float


class PolynomialLawSpec(StrictModel):
    law: Literal["polynomial"]
    coefficients: list[float] = Field(min_length=1)


class SinusoidLawSpec(StrictModel):
    law: Literal["sinusoid"]
    amplitude: float
    frequency: float
    phase: float = 0.0
    offset: float = 0.0


MagnitudeSpec = Annotated[
    Union[ConstantLawSpec, PolynomialLawSpec, SinusoidLawSpec], Field(discriminator="law")
]


# Field families


class StaticFieldSpec(StrictModel):
    family: Literal["static"]
    direction: tuple[float, float, float] = (0.0, 0.0, 1.0)
    kb: float = 1.0

    @field_validator("direction")
    def check_direction(cls, v: tuple[float, float, float]) -> tuple[float, float, float]:
        if math.hypot(*v) == 0.0:
            raise ValueError("direction must be a nonzero vector")
        return v


class PrecessionFieldSpec(StrictModel):
    family: Literal["precession"]
    theta: float = Field(ge=0.0, le=math.pi)
    omega: float
    kb: float


class ClassIFieldSpec(StrictModel):
    family: Literal["class_i"]
    path: PathSpec


class ClassIISpiralFieldSpec(StrictModel):
    family: Literal["class_ii_spiral"]
    lam: float = Field(alias="lambda", gt=0.0)
    c1: float = Field(gt=0.0)
    c2: float
    sign: Literal[1, -1] = 1

    @model_validator(mode="after")
    def check_speed(self) -> "ClassIISpiralFieldSpec":
        if self.c1 <= self.lam:
            raise ValueError(f"c1 must exceed lambda, got c1={self.c1}, lambda={self.lam}")
        return self

    @property
    def domain_end(self) -> float:
        return math.pi / (2.0 * self.lam)


class ClassIIPrecessionFieldSpec(StrictModel):
    family: Literal["class_ii_precession"]
    theta: float = Field(ge=0.0, le=math.pi)
    omega: float
    c2: float


class SuddenFieldSpec(StrictModel):
    family: Literal["sudden"]
    path: PathSpec


class TabulatedFieldSpec(StrictModel):
    family: Literal["tabulated"]
    csv: str
    magnitude: MagnitudeSpec


FieldConfig = Annotated[
    Union[
        StaticFieldSpec,
        PrecessionFieldSpec,
        ClassIFieldSpec,
        ClassIISpiralFieldSpec,
        ClassIIPrecessionFieldSpec,
        SuddenFieldSpec,
        TabulatedFieldSpec,
    ],
    Field(discriminator="family"),
]


# Scenario


class GridSpec(StrictModel):
    t_end: float = Field(gt=0.0)
    steps: int = Field(default=settings.DEFAULT_STEPS, ge=2)


class ResonanceScanSpec(StrictModel):
    kb_range: tuple[float, float]
    count: int = Field(ge=2)
    t_end: Optional[float] = Field(default=None, gt=0.0)
    steps: Optional[int] = Field(default=None, ge=2)

    @field_validator("kb_range")
    def check_range(cls, v: tuple[float, float]) -> tuple[float, float]:
        if not v[0] < v[1]:
            raise ValueError(f"kb_range must be increasing, got {list(v)}")
        return v

    def kb_values(self) -> list[float]:
        lo, hi = self.kb_range
        width = (hi - lo) / (self.count - 1)
        return [lo + i * width for i in range(self.count)]

    @property
    def cell(self) -> float:
        return (self.kb_range[1] - self.kb_range[0]) / (self.count - 1)


class AdiabaticSpec(StrictModel):
    epsilons: list[float] = Field(default_factory=lambda: [1.0, 0.5, 0.25, 0.125], min_length=2)
    steps: Optional[int] = Field(default=None, ge=2)

    @field_validator("epsilons")
    def check_epsilons(cls, v: list[float]) -> list[float]:
        if any(e <= 0 for e in v):
            raise ValueError("slowing factors must be positive")
        if any(b >= a for a, b in zip(v, v[1:])):
            raise ValueError("slowing factors must be strictly decreasing")
        return v


OutputName = Literal[
    "traces", "residuals", "transitions", "berry", "resonance_scan", "adiabatic", "convergence"
]


class ScenarioConfig(StrictModel):
    """One scenario file."""

    name: str = Field(pattern=r"^[A-Za-z0-9_.-]+$")
    spin_j: str
    field: Optional[FieldConfig] = None
    grid: Optional[GridSpec] = None
    stepper: Stepper = Stepper(settings.DEFAULT_STEPPER)
    tolerance: Optional[float] = Field(default=None, gt=0.0)
    outputs: list[OutputName] = Field(default_factory=list)
    resonance_scan: Optional[ResonanceScanSpec] = None
    adiabatic: Optional[AdiabaticSpec] = None

    @field_validator("spin_j", mode="before")
    def check_spin(cls, v: Any) -> str:
        """Accept 0.5, 1, "3/2"; store the canonical fraction string."""
        spin = parse_spin(v)
        dim = int(2 * spin) + 1
        if dim > settings.SPIN_DIM_CAP:
            raise ValueError(f"spin {spin} needs dimension {dim}, cap is {settings.SPIN_DIM_CAP}")
        return str(spin)

    @property
    def effective_tolerance(self) -> float:
        if self.tolerance is not None:
            return self.tolerance
        return settings.default_tolerance(self.stepper.value)

    @property
    def family(self) -> str:
        return self.field.family if self.field is not None else "algebra"

    def wants(self, output: str) -> bool:
        return output in self.outputs

    def with_overrides(
        self, stepper: Optional[str] = None, steps: Optional[int] = None
    ) -> "ScenarioConfig":
        """Copy with command-line overrides applied and re-validated."""
        data = self.model_dump(by_alias=True, exclude_none=True)
        if stepper is not None:
            data["stepper"] = stepper
        if steps is not None and "grid" in data:
            data["grid"]["steps"] = steps
        try:
            return ScenarioConfig.model_validate(data)
        except ValidationError as e:
            error = e.errors()[0]
            key = ".".join(str(part) for part in error["loc"])
            raise ScenarioConfigError(f"override rejected: {error['msg']}", key=key) from None


def spiral_domain_end(config: ScenarioConfig) -> Optional[float]:
    """Domain bound pi / (2 lambda) for spiral-based fields, else None."""
    spec = config.field
    if isinstance(spec, ClassIISpiralFieldSpec):
        return spec.domain_end
    if isinstance(spec, (ClassIFieldSpec, SuddenFieldSpec)) and isinstance(spec.path, SpiralPathSpec):
        return spec.path.domain_end
    return None


def closed_period(config: ScenarioConfig) -> Optional[float]:
    """Natural loop period of the field's path, when it has one."""
    spec = config.field
    if isinstance(spec, (PrecessionFieldSpec, ClassIIPrecessionFieldSpec)):
        return 2.0 * math.pi / abs(spec.omega) if spec.omega else None
    if isinstance(spec, (ClassIFieldSpec, SuddenFieldSpec)) and isinstance(
        spec.path, PrecessionPathSpec
    ):
        return 2.0 * math.pi / abs(spec.path.omega) if spec.path.omega else None
    return None


def semantic_errors(config: ScenarioConfig) -> list[tuple[str, str]]:
    """Cross-field problems as (dotted key, message) pairs."""
    errors: list[tuple[str, str]] = []
    if config.field is not None and config.grid is None:
        errors.append(("grid", "a scenario with a field needs a grid"))
    if config.field is None:
        if config.outputs:
            errors.append(("outputs", f"outputs {list(config.outputs)} need a field"))
        return errors

    bound = spiral_domain_end(config)
    if bound is not None and config.grid is not None and config.grid.t_end >= bound:
        errors.append(
            (
                "grid.t_end",
                f"t_end={config.grid.t_end} reaches the spiral domain bound "
                f"pi/(2*lambda)={bound:.16g}",
            )
        )

    if config.wants("berry") and closed_period(config) is None and config.family != "tabulated":
        errors.append(("outputs", f"berry needs a closed path; family {config.family} has none"))

    is_precession = isinstance(config.field, PrecessionFieldSpec)
    if config.wants("resonance_scan"):
        if not is_precession:
            errors.append(("outputs", "resonance_scan needs the precession family"))
        elif config.resonance_scan is None:
            errors.append(("resonance_scan", "resonance_scan output needs a resonance_scan section"))
    if config.wants("adiabatic") and not is_precession:
        errors.append(("outputs", "adiabatic needs the precession family"))
    return errors


# YAML location lookup


def _child(node: yaml.Node, key: Any) -> Optional[yaml.Node]:
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            if key_node.value == str(key):
                return value_node
        return None
    if isinstance(node, yaml.SequenceNode) and isinstance(key, int):
        return node.value[key] if 0 <= key < len(node.value) else None
    return None


def locate(root: Optional[yaml.Node], loc: tuple[Any, ...]) -> tuple[str, Optional[int]]:
    """
    Dotted key and 1-based line for a validation location.

    Location parts with no YAML counterpart (union tags) are dropped, except a
    trailing missing key, which is kept and reported at its parent's line.
    """
    parts: list[str] = []
    node = root
    for i, part in enumerate(loc):
        child = _child(node, part) if node is not None else None
        if child is not None:
            parts.append(str(part))
            node = child
        elif i == len(loc) - 1:
            parts.append(str(part))
    line = node.start_mark.line + 1 if node is not None else None
    return ".".join(parts), line


def load_scenario(path: Union[str, Path]) -> ScenarioConfig:
    """
    Read and validate a scenario file.

    Raises:
        ScenarioConfigError: On YAML syntax, schema or cross-field errors
        OSError: If the file cannot be read
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        problem = getattr(e, "problem", None) or str(e)
        raise ScenarioConfigError(
            f"invalid YAML: {problem}", line=mark.line + 1 if mark is not None else None
        ) from None
    if not isinstance(data, dict):
        raise ScenarioConfigError("scenario file must hold a mapping")

    try:
        config = ScenarioConfig.model_validate(data)
    except ValidationError as e:
        error = e.errors()[0]
        loc = tuple(error["loc"])
        if error["type"] in ("union_tag_invalid", "union_tag_not_found"):
            tag = str(error.get("ctx", {}).get("discriminator", "")).strip("'")
            loc = loc + (tag,) if tag else loc
        key, line = locate(root, loc)
        raise ScenarioConfigError(error["msg"], key=key, line=line) from None

    for key, message in semantic_errors(config):
        _, line = locate(root, tuple(key.split(".")))
        raise ScenarioConfigError(message, key=key, line=line)
    return config
