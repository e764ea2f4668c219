from typing import List, Literal, Optional, Union

from pydantic import BaseModel, Field, field_validator, model_validator


class ElementSpec(BaseModel):
    """A group element given by log coordinates or by its matrix"""
    log: Optional[List[float]] = Field(None, description="Coordinates in the basis xi_1..xi_d")
    matrix: Optional[List[List[float]]] = Field(None, description="Matrix in the defining representation")

    @model_validator(mode="after")
    def exactly_one(self):
        if (self.log is None) == (self.matrix is None):
            raise ValueError("give exactly one of 'log' or 'matrix'")
        return self


class GroupSpec(BaseModel):
    name: Literal["SO3", "SE2", "RD", "circle-K"] = Field(..., description="Group name")
    dim: Optional[int] = Field(None, ge=1, description="Dimension for RD")
    bump_inner: Optional[float] = Field(None, gt=0, description="r_in of the coordinate cutoff")
    bump_outer: Optional[float] = Field(None, gt=0, description="r_out of the coordinate cutoff")
    cutoff_radius: Optional[float] = Field(None, gt=0, description="Chart radius r_cut")

    @model_validator(mode="after")
    def rd_needs_dim(self):
        if self.name == "RD" and self.dim is None:
            raise ValueError("RD requires 'dim'")
        return self


class DiscreteLawSpec(BaseModel):
    kind: Literal["discrete"] = "discrete"
    support: List[ElementSpec] = Field(..., min_length=1)
    weights: List[float] = Field(..., min_length=1)

    @model_validator(mode="after")
    def same_length(self):
        if len(self.support) != len(self.weights):
            raise ValueError("support and weights differ in length")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be nonnegative")
        return self


class GaussianLawSpec(BaseModel):
    kind: Literal["gaussian"] = "gaussian"
    sigma: Union[float, List[float]] = Field(..., description="Standard deviation per coordinate")
    mean: Optional[List[float]] = Field(None, description="Mean in log coordinates")


class LaplaceLawSpec(BaseModel):
    kind: Literal["laplace"] = "laplace"
    scale: Union[float, List[float]] = Field(..., description="Laplace scale per coordinate")
    mean: Optional[List[float]] = None


class KInvariantLawSpec(BaseModel):
    """Uniform mixture of colatitude circles on the sphere"""
    kind: Literal["k-invariant"] = "k-invariant"
    colatitudes: List[float] = Field(..., min_length=1)
    weights: List[float] = Field(..., min_length=1)

    @model_validator(mode="after")
    def same_length(self):
        if len(self.colatitudes) != len(self.weights):
            raise ValueError("colatitudes and weights differ in length")
        return self


LawSpec = Union[DiscreteLawSpec, GaussianLawSpec, LaplaceLawSpec, KInvariantLawSpec]


def _strictly_increasing(values: List[float], what: str) -> List[float]:
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError(f"{what} must be strictly increasing")
    return values


class DriftAtomSpec(BaseModel):
    time: float = Field(..., gt=0)
    jump: ElementSpec


class DriftSpec(BaseModel):
    grid: List[float] = Field(default_factory=lambda: [0.0, 1.0])
    components: Optional[List[List[float]]] = Field(None, description="b_j(t_k), one row per grid point")
    atoms: List[DriftAtomSpec] = Field(default_factory=list)

    @field_validator("grid")
    @classmethod
    def grid_ok(cls, v):
        if not v or v[0] != 0.0:
            raise ValueError("drift grid must start at 0")
        return _strictly_increasing(v, "drift grid")

    @model_validator(mode="after")
    def rows_match(self):
        if self.components is not None and len(self.components) != len(self.grid):
            raise ValueError("one component row per drift grid point is required")
        return self


class CovSpec(BaseModel):
    grid: List[float] = Field(default_factory=lambda: [0.0, 1.0])
    matrices: Optional[List[List[List[float]]]] = Field(None, description="A(t_k), one matrix per grid point")

    @field_validator("grid")
    @classmethod
    def grid_ok(cls, v):
        if not v or v[0] != 0.0:
            raise ValueError("covariance grid must start at 0")
        return _strictly_increasing(v, "covariance grid")

    @model_validator(mode="after")
    def rows_match(self):
        if self.matrices is not None and len(self.matrices) != len(self.grid):
            raise ValueError("one matrix per covariance grid point is required")
        return self


class LevyPieceSpec(BaseModel):
    start: float = Field(..., ge=0)
    end: float
    rate: float = Field(..., ge=0, description="Expected jumps per unit time")
    law: LawSpec = Field(..., discriminator="kind")

    @model_validator(mode="after")
    def ordered(self):
        if self.end <= self.start:
            raise ValueError("piece end must exceed start")
        return self


class LevySpec(BaseModel):
    pieces: List[LevyPieceSpec] = Field(default_factory=list)


class FixedJumpSpec(BaseModel):
    time: float = Field(..., gt=0)
    law: LawSpec = Field(..., discriminator="kind")


class SpaceSpec(BaseModel):
    name: Literal["S2"] = "S2"
    twist: float = Field(0.0, description="Off-chart twist of the section map")
    irreducible: bool = True
    drift_grid: Optional[List[float]] = None
    drift_points: Optional[List[List[float]]] = Field(None, description="b_t as unit vectors on the drift grid")


class TripleFile(BaseModel):
    """Extended Levy triple declaration"""
    name: str = Field("triple", description="Label used in reports")
    group: GroupSpec
    drift: DriftSpec = Field(default_factory=DriftSpec)
    cov: CovSpec = Field(default_factory=CovSpec)
    levy: LevySpec = Field(default_factory=LevySpec)
    atoms: List[FixedJumpSpec] = Field(default_factory=list)
    space: Optional[SpaceSpec] = Field(None, description="Present for triples on a homogeneous space")

    @field_validator("atoms")
    @classmethod
    def atom_times_increasing(cls, v):
        _strictly_increasing([a.time for a in v], "atom times")
        return v
