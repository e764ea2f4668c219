from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field


class Violation(BaseModel):
    """One violated triple invariant"""
    code: str = Field(..., description="Stable violation identifier")
    message: str = Field(..., description="Human readable description")
    location: Optional[str] = Field(None, description="Where the violation occurs (time, piece, atom)")


class ValidationReport(BaseModel):
    violations: List[Violation] = Field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    def add(self, code: str, message: str, location: Optional[str] = None) -> None:
        self.violations.append(Violation(code=code, message=message, location=location))

    def messages(self) -> List[str]:
        return [v.message for v in self.violations]


class MartingaleEntry(BaseModel):
    f_id: str
    s: float
    t: float
    h_id: str
    mean: float
    stderr: float
    z: float
    n: int = Field(..., description="Number of paths")
    passed: bool


class MartingaleReport(BaseModel):
    form: str
    n_paths: int
    z_threshold: float
    required_pass_rate: float
    entries: List[MartingaleEntry] = Field(default_factory=list)
    bounds: Dict[str, float] = Field(default_factory=dict, description="Analytic bound on |M_tf| per test function")
    observed_max: Dict[str, float] = Field(default_factory=dict, description="Observed max |M_tf| per test function")

    @property
    def pass_rate(self) -> float:
        return sum(e.passed for e in self.entries) / max(len(self.entries), 1)

    @property
    def passed(self) -> bool:
        return self.pass_rate >= self.required_pass_rate

    @property
    def max_abs_z(self) -> float:
        return max((abs(e.z) for e in self.entries), default=0.0)

    def summary(self) -> dict:
        return {
            "form": self.form,
            "n_paths": self.n_paths,
            "entries": len(self.entries),
            "pass_rate": self.pass_rate,
            "max_abs_z": self.max_abs_z,
            "passed": self.passed,
        }


class FixedJumpLawEntry(BaseModel):
    time: float
    total_variation: float
    tolerance: float
    n: int
    passed: bool


class FixedJumpLawReport(BaseModel):
    entries: List[FixedJumpLawEntry] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)


class CharacteristicFunctionReport(BaseModel):
    time: float
    frequencies: List[List[float]]
    empirical: List[List[float]] = Field(..., description="(re, im) per frequency")
    exact: List[List[float]]
    max_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance


class InvarianceReport(BaseModel):
    object_kind: str = Field(..., description="measure, point or matrix")
    residual: float
    tolerance: float
    passed: bool
    details: Dict[str, float] = Field(default_factory=dict)


class TwoSampleEntry(BaseModel):
    f_id: str
    t: float
    difference: float
    stderr: float
    z: float
    passed: bool


class TwoSampleReport(BaseModel):
    z_threshold: float
    entries: List[TwoSampleEntry] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)


class DetectedAtom(BaseModel):
    time: float
    probability: float = Field(..., description="Fraction of paths with a jump above the floor")
    support_size: int


class ModulusTable(BaseModel):
    windows: List[float]
    q_modulus: List[float]
    b_modulus: List[float]

    @property
    def monotone(self) -> bool:
        q_ok = all(b <= a + 1e-12 for a, b in zip(self.q_modulus, self.q_modulus[1:]))
        b_ok = all(b <= a + 1e-12 for a, b in zip(self.b_modulus, self.b_modulus[1:]))
        return q_ok and b_ok


class EstimationDiagnostics(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    meshes: List[float]
    detected_atoms: List[DetectedAtom] = Field(default_factory=list)
    moduli: Optional[ModulusTable] = None
    extrapolation_nonlinear: bool = False
    extrapolation_curvature: float = 0.0
    out_of_chart_cells: List[float] = Field(default_factory=list, description="Cell end times with out-of-chart means")
    clipped_increments: int = 0


class RunReport(BaseModel):
    """Top-level report written by every CLI command"""
    command: str
    version: str
    config_hash: str
    seed: int
    passed: bool
    sections: Dict[str, dict] = Field(default_factory=dict)


class ComparisonEntry(BaseModel):
    """One estimated quantity against its true value"""
    name: str
    estimate: float
    target: float
    error: float
    tolerance: float
    passed: bool


class RoundTripReport(BaseModel):
    entries: List[ComparisonEntry] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def add(self, name: str, estimate: float, target: float, error: float, tolerance: float) -> None:
        self.entries.append(ComparisonEntry(
            name=name, estimate=estimate, target=target, error=error, tolerance=tolerance, passed=error <= tolerance
        ))
