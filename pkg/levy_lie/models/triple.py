"""
Extended Levy triples and their discretized quadruple form.

Drift components and covariance matrices are piecewise linear on their own
grids and held constant after the last grid point. The continuous part of the
Levy measure function is finite activity: a list of time pieces, each with a
constant rate and a spatial law.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple
import logging

import numpy as np

from levy_lie.models.group import GroupDescriptor
from levy_lie.models.measure import SpatialLaw

logger = logging.getLogger(__name__)

TIME_TOL = 1e-12


def interpolate_rows(grid: np.ndarray, values: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Piecewise-linear interpolation of values[k] (any trailing shape), constant outside the grid."""
    times = np.asarray(times, dtype=float)
    flat = values.reshape(values.shape[0], -1)
    out = np.stack([np.interp(times, grid, flat[:, c]) for c in range(flat.shape[1])], axis=-1)
    return out.reshape(times.shape + values.shape[1:])


# ============================================================================
# Drift
# ============================================================================

@dataclass(frozen=True)
class DriftAtom:
    time: float
    jump: np.ndarray


@dataclass(frozen=True)
class DriftPath:
    """
    Extended drift b_t: d piecewise-linear components on ``grid`` (b_j(0) = 0)
    and jump atoms (u, h_u). The path value is the ordered product of the
    continuous flow and the atoms up to t.
    """
    grid: np.ndarray
    components: np.ndarray
    atoms: Tuple[DriftAtom, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "grid", np.asarray(self.grid, dtype=float))
        object.__setattr__(self, "components", np.asarray(self.components, dtype=float))
        object.__setattr__(self, "atoms", tuple(sorted(self.atoms, key=lambda a: a.time)))

    @classmethod
    def zero(cls, dim: int) -> "DriftPath":
        return cls(np.array([0.0, 1.0]), np.zeros((2, dim)))

    @property
    def dim(self) -> int:
        return self.components.shape[1]

    @property
    def atom_times(self) -> List[float]:
        return [a.time for a in self.atoms]

    def components_at(self, times: np.ndarray) -> np.ndarray:
        return interpolate_rows(self.grid, self.components, times)

    def continuous_part(self) -> "DriftPath":
        return DriftPath(self.grid, self.components, ())


@dataclass(frozen=True)
class DriftTrajectory:
    """
    Values of an extended drift on a grid: ``values[k] = b_{t_k}`` and
    ``left_values[k] = b_{t_k-}`` (equal away from atoms).
    """
    grid: np.ndarray
    values: np.ndarray
    left_values: np.ndarray

    def index_of(self, t: float) -> int:
        return int(np.searchsorted(self.grid, t + TIME_TOL, side="right") - 1)

    def value_at(self, t: float) -> np.ndarray:
        return self.values[max(self.index_of(t), 0)]


# ============================================================================
# Covariance
# ============================================================================

@dataclass(frozen=True)
class CovMatrixFunction:
    """A(t): symmetric matrices on a grid, linear in between, A(0) = 0"""
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "grid", np.asarray(self.grid, dtype=float))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    @classmethod
    def zero(cls, dim: int) -> "CovMatrixFunction":
        return cls(np.array([0.0, 1.0]), np.zeros((2, dim, dim)))

    @classmethod
    def linear(cls, rate: np.ndarray, horizon: float) -> "CovMatrixFunction":
        """A(t) = t * rate on [0, horizon]"""
        rate = np.asarray(rate, dtype=float)
        return cls(np.array([0.0, horizon]), np.stack([np.zeros_like(rate), horizon * rate]))

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def at(self, times) -> np.ndarray:
        return interpolate_rows(self.grid, self.values, np.asarray(times, dtype=float))

    def increments_on(self, grid: np.ndarray) -> np.ndarray:
        return np.diff(self.at(grid), axis=0)


# ============================================================================
# Levy measure functions
# ============================================================================

@dataclass(frozen=True)
class LevyPiece:
    """Constant jump rate on [start, end) with spatial law ``law``"""
    start: float
    end: float
    rate: float
    law: SpatialLaw

    def overlap(self, t0: float, t1: float) -> float:
        return max(0.0, min(self.end, t1) - max(self.start, t0))


@dataclass(frozen=True)
class LevyMeasureFunctionC:
    """Continuous part eta^c as a finite list of pieces"""
    pieces: Tuple[LevyPiece, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "pieces", tuple(self.pieces))

    def breakpoints(self) -> List[float]:
        return sorted({p.start for p in self.pieces} | {p.end for p in self.pieces})

    def intensity_on(self, t0: float, t1: float) -> List[Tuple[float, SpatialLaw]]:
        """(expected jump count, law) per piece active on (t0, t1]"""
        out = []
        for piece in self.pieces:
            mass = piece.rate * piece.overlap(t0, t1)
            if mass > 0:
                out.append((mass, piece.law))
        return out

    def mass(self, t: float) -> float:
        return float(sum(m for m, _ in self.intensity_on(0.0, t)))

    def integrate(self, t: float, fn) -> np.ndarray:
        """eta^c(t, fn)"""
        total = 0.0
        for mass, law in self.intensity_on(0.0, t):
            total = total + mass * law.as_discrete().integrate(fn)
        return np.asarray(total)


@dataclass(frozen=True)
class FixedJump:
    """Fixed jump time u with law nu_u (a probability measure, mass at e allowed)"""
    time: float
    law: SpatialLaw


@dataclass(frozen=True)
class FixedJumpAtoms:
    atoms: Tuple[FixedJump, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(sorted(self.atoms, key=lambda a: a.time)))

    @property
    def times(self) -> List[float]:
        return [a.time for a in self.atoms]


@dataclass(frozen=True)
class MeasureCell:
    """
    Mass ``mass`` spread uniformly over [start, end) with law ``law``;
    start == end marks an instantaneous cell (an atom in time).
    """
    start: float
    end: float
    mass: float
    law: SpatialLaw

    @property
    def instantaneous(self) -> bool:
        return abs(self.end - self.start) <= TIME_TOL

    def fraction(self, t: float) -> float:
        if self.instantaneous:
            return 1.0 if self.start <= t + TIME_TOL else 0.0
        return float(np.clip((t - self.start) / (self.end - self.start), 0.0, 1.0))


@dataclass(frozen=True)
class MeasureFunction:
    """A general measure function eta(t, .) as continuous and instantaneous cells"""
    cells: Tuple[MeasureCell, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(self.cells))

    def evaluate(self, t: float, fn) -> float:
        total = 0.0
        for cell in self.cells:
            frac = cell.fraction(t)
            if frac > 0 and cell.mass > 0:
                total += frac * cell.mass * float(cell.law.as_discrete().integrate(fn))
        return total


# ============================================================================
# Triple and quadruple
# ============================================================================

@dataclass(frozen=True)
class ExtendedLevyTriple:
    group: GroupDescriptor
    drift: DriftPath
    cov: CovMatrixFunction
    levy_c: LevyMeasureFunctionC = field(default_factory=LevyMeasureFunctionC)
    atoms: FixedJumpAtoms = field(default_factory=FixedJumpAtoms)
    name: str = "triple"

    @classmethod
    def zero(cls, group: GroupDescriptor) -> "ExtendedLevyTriple":
        return cls(group, DriftPath.zero(group.dim), CovMatrixFunction.zero(group.dim), name="zero")

    def breakpoints(self) -> List[float]:
        points = set(self.drift.grid.tolist()) | set(self.cov.grid.tolist())
        points |= set(self.levy_c.breakpoints())
        points |= set(self.atoms.times) | set(self.drift.atom_times)
        return sorted(points)


@dataclass
class Quadruple:
    """
    (b, A, eta, nu) discretized on ``grid``: cell k is (t_k, t_{k+1}].

    ``drift_increments[k]`` and ``cov_increments[k]`` are the increments over
    cell k, ``intensities[k]`` the (mass, law) pairs of eta over cell k and
    ``jump_laws`` maps a grid index to the fixed-jump law nu at that time.
    """
    group: GroupDescriptor
    grid: np.ndarray
    drift_increments: np.ndarray
    cov_increments: np.ndarray
    intensities: List[List[Tuple[float, SpatialLaw]]]
    jump_laws: Dict[int, SpatialLaw] = field(default_factory=dict)

    def __post_init__(self):
        n_cells = len(self.grid) - 1
        if self.drift_increments.shape[0] != n_cells or self.cov_increments.shape[0] != n_cells:
            raise ValueError("quadruple increments do not match the grid")
        if len(self.intensities) != n_cells:
            raise ValueError("quadruple intensities do not match the grid")

    @property
    def n_cells(self) -> int:
        return len(self.grid) - 1


def refine_grid(points: Sequence[float], horizon: float, steps_per_unit: int) -> np.ndarray:
    """Uniform grid of the given density on [0, horizon] merged with ``points``."""
    n = max(int(round(horizon * steps_per_unit)), 1)
    base = np.linspace(0.0, horizon, n + 1)
    extra = np.array([p for p in points if 0.0 <= p <= horizon], dtype=float)
    merged = np.sort(np.concatenate([base, extra]))
    keep = np.concatenate([[True], np.diff(merged) > 1e-9])
    merged = merged[keep]
    # snap merged neighbours back onto the declared points
    for p in extra:
        merged[np.argmin(np.abs(merged - p))] = p
    return merged


def grid_index(grid: np.ndarray, t: float, tol: float = 1e-9) -> Optional[int]:
    k = int(np.argmin(np.abs(grid - t)))
    return k if abs(grid[k] - t) <= tol else None


