"""
Pydantic schemas for check verdicts and the per-scenario summary file.
"""

from typing import Literal, Optional

from pydantic import BaseModel, Field


class CheckResult(BaseModel):
    """One executable identity compared against its threshold."""

    name: str
    value: float
    threshold: float
    relation: Literal["<=", "<", ">="] = "<="
    passed: bool

    @classmethod
    def compare(
        cls, name: str, value: float, threshold: float, relation: str = "<="
    ) -> "CheckResult":
        value, threshold = float(value), float(threshold)
        if relation == "<=":
            passed = value <= threshold
        elif relation == "<":
            passed = value < threshold
        else:
            passed = value >= threshold
        return cls(name=name, value=value, threshold=threshold, relation=relation, passed=passed)

    def row(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (
            f"{self.name:<32} {self.value:>13.4e} {self.relation:>2} "
            f"{self.threshold:<11.4e} {verdict}"
        )


class BerrySummary(BaseModel):
    solid_angle: float
    max_phase_error: float
    off_diagonal: float


class AdiabaticSummary(BaseModel):
    epsilons: list[float]
    peaks: list[float]


class ScenarioSummary(BaseModel):
    """Contents of <name>_summary.yaml; holds no timestamps."""

    name: str
    spin_j: str
    family: str
    stepper: str
    steps: Optional[int] = None
    t_end: Optional[float] = None
    tolerance: float
    frame_anchor_time: Optional[float] = None
    passed: bool
    checks: list[CheckResult] = Field(default_factory=list)
    maxima: dict[str, float] = Field(default_factory=dict)
    berry: Optional[BerrySummary] = None
    adiabatic: Optional[AdiabaticSummary] = None
    files: list[str] = Field(default_factory=list)
