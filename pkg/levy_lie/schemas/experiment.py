from pathlib import Path
from typing import List, Literal, Optional, Tuple
import enum

from pydantic import BaseModel, Field, field_validator, model_validator

from levy_lie.core.config import settings
from levy_lie.models.path import Scheme


class CommandName(str, enum.Enum):
    SIMULATE = "simulate"
    ESTIMATE = "estimate"
    VERIFY = "verify"
    ROUNDTRIP = "roundtrip"
    PROJECT = "project"
    LIFT_CHECK = "lift-check"


class MartingaleForm(str, enum.Enum):
    """Which representation of the martingale is tested"""
    SHIFTED = "shifted"
    FINITE_VARIATION = "finite-variation"
    QUADRUPLE = "quadruple"


class SimulationSection(BaseModel):
    steps_per_unit: int = Field(default_factory=lambda: settings.default_steps_per_unit, ge=1)
    horizon: float = Field(1.0, gt=0)
    paths: int = Field(1000, ge=1)
    seed: int = Field(default_factory=lambda: settings.default_seed)
    scheme: Scheme = Scheme.FINITE_VARIATION
    chunk_size: int = Field(5000, ge=1, description="Paths simulated per batch")
    workers: int = Field(default_factory=lambda: settings.sim_workers, ge=1)


class EstimationSection(BaseModel):
    meshes: List[float] = Field(default_factory=lambda: list(settings.estimator_meshes))
    threshold: float = Field(default_factory=lambda: settings.detection_threshold, gt=0, lt=1)
    ball_fractions: List[float] = Field(default_factory=lambda: list(settings.ball_fractions))
    candidate_times: List[float] = Field(default_factory=list, description="Declared fixed-jump candidates J")

    @field_validator("meshes")
    @classmethod
    def meshes_decreasing(cls, v):
        if not v or any(b >= a for a, b in zip(v, v[1:])):
            raise ValueError("meshes must be non-empty and strictly decreasing")
        return v


class VerificationSection(BaseModel):
    bank_size: int = Field(8, ge=1)
    pairs: Optional[List[Tuple[float, float]]] = Field(None, description="(s, t) pairs; default schedule if omitted")
    form: MartingaleForm = MartingaleForm.SHIFTED
    z_threshold: float = Field(default_factory=lambda: settings.z_threshold, gt=0)
    pass_rate: float = Field(default_factory=lambda: settings.pass_rate, gt=0, le=1)
    min_paths: int = Field(default_factory=lambda: settings.min_verify_paths, ge=1)


class ExperimentConfig(BaseModel):
    """One CLI run"""
    command: CommandName
    triple: str = Field(..., description="Path of the triple declaration file")
    simulation: SimulationSection = Field(default_factory=SimulationSection)
    estimation: EstimationSection = Field(default_factory=EstimationSection)
    verification: VerificationSection = Field(default_factory=VerificationSection)
    output_dir: str = Field(default_factory=lambda: settings.output_dir)
    format: Literal["csv", "json"] = "csv"
    lifted_triple: Optional[str] = Field(None, description="Optional SO(3) triple for lift-check")
    reference_triple: Optional[str] = Field(
        None, description="Triple the martingale test is run against; defaults to the simulated one"
    )

    @model_validator(mode="after")
    def files_exist(self):
        if not Path(self.triple).is_file():
            raise ValueError(f"triple file not found: {self.triple}")
        if self.lifted_triple is not None and not Path(self.lifted_triple).is_file():
            raise ValueError(f"lifted triple file not found: {self.lifted_triple}")
        if self.reference_triple is not None and not Path(self.reference_triple).is_file():
            raise ValueError(f"reference triple file not found: {self.reference_triple}")
        return self
